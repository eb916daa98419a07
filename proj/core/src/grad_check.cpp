#include "idv/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "idv/error.hpp"
#include "idv/rng.hpp"

namespace idv {
namespace {

struct Evaluation {
  double loss;
  std::uint64_t signature;
};

Evaluation evaluate(const LossBuilder& build) {
  Graph g;
  g.set_track_branches(true);
  Var loss = build(g);
  if (loss.value().size() != 1) {
    throw InvalidArgument("grad_check: builder must return a scalar, got shape " +
                          shape_string(loss.shape()));
  }
  return {loss.value()[0], g.branch_signature()};
}

std::vector<std::size_t> pick_elements(std::size_t n, std::size_t limit, Rng rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || n <= limit) return idx;
  // Partial Fisher-Yates; sorted afterwards so the sweep order is stable.
  for (std::size_t i = 0; i < limit; ++i) {
    std::swap(idx[i], idx[i + rng.uniform_index(n - i)]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

std::vector<std::string> GradCheckReport::failures() const {
  std::vector<std::string> names;
  for (const auto& p : params) {
    if (!p.passed) names.push_back(p.name);
  }
  return names;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os.precision(3);
  for (const auto& p : params) {
    os << (p.passed ? "  ok   " : "  FAIL ") << p.name << "  checked=" << p.checked
       << " skipped=" << p.skipped_nonsmooth << " max_rel_err=" << std::scientific
       << p.max_rel_error << std::defaultfloat;
    if (!p.passed) {
      os << " (index " << p.worst_index << ": analytic " << p.worst_analytic << ", numeric "
         << p.worst_numeric << ")";
    }
    os << '\n';
  }
  os << "max relative error " << std::scientific << max_rel_error << std::defaultfloat << " -> "
     << (passed ? "PASS" : "FAIL") << '\n';
  return os.str();
}

GradCheckReport grad_check(const LossBuilder& build, ParamStore& params,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw InvalidArgument("grad_check: step must be positive");

  ParamGrads analytic = params.zero_grads_like();
  Evaluation base{};
  {
    Graph g;
    g.set_track_branches(true);
    Var loss = build(g);
    if (loss.value().size() != 1) {
      throw InvalidArgument("grad_check: builder must return a scalar, got shape " +
                            shape_string(loss.shape()));
    }
    base = {loss.value()[0], g.branch_signature()};
    g.backward(loss);
    g.accumulate_param_grads(analytic);
  }
  const Evaluation again = evaluate(build);
  if (again.loss != base.loss || again.signature != base.signature) {
    throw Error("grad_check: loss builder is not deterministic (" + std::to_string(base.loss) +
                " vs " + std::to_string(again.loss) + ")");
  }

  GradCheckReport report;
  const Rng sampler(options.seed);
  for (auto& p : params) {
    ParamCheck check;
    check.name = p.name;
    const auto elements = pick_elements(p.value.size(), options.max_elements_per_param,
                                        sampler.stream(p.name));
    for (std::size_t i : elements) {
      const double original = p.value[i];
      p.value[i] = original + options.step;
      const Evaluation plus = evaluate(build);
      p.value[i] = original - options.step;
      const Evaluation minus = evaluate(build);
      p.value[i] = original;
      if (plus.signature != base.signature || minus.signature != base.signature) {
        ++check.skipped_nonsmooth;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * options.step);
      const double a = analytic[p.index][i];
      const double err = relative_error(a, numeric, options.denominator_floor);
      ++check.checked;
      if (err > check.max_rel_error || !std::isfinite(err)) {
        check.max_rel_error = err;
        check.worst_index = i;
        check.worst_analytic = a;
        check.worst_numeric = numeric;
      }
    }
    check.passed = std::isfinite(check.max_rel_error) && check.max_rel_error <= options.tolerance;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.passed = report.passed && check.passed;
    report.params.push_back(std::move(check));
  }
  return report;
}

}  // namespace idv
