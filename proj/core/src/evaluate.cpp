#include "idv/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "idv/error.hpp"
#include "idv/metrics.hpp"
#include "idv/rng.hpp"

namespace idv {

std::string to_string(Protocol protocol) {
  switch (protocol) {
    case Protocol::SingleQuery: return "single-query";
    case Protocol::SingleShot: return "single-shot";
    case Protocol::MultiShot: return "multi-shot";
    case Protocol::CameraMatrix: return "camera-matrix";
    case Protocol::DistractorSweep: return "distractor-sweep";
  }
  return "?";
}

Protocol parse_protocol(const std::string& text) {
  for (Protocol p : {Protocol::SingleQuery, Protocol::SingleShot, Protocol::MultiShot,
                     Protocol::CameraMatrix, Protocol::DistractorSweep}) {
    if (to_string(p) == text) return p;
  }
  throw InvalidArgument("unknown protocol '" + text +
                        "' (expected single-query, single-shot, multi-shot, camera-matrix or distractor-sweep)");
}

namespace {

struct Scorer {
  const DescriptorSet& query;
  const DescriptorSet& gallery;
  std::vector<double> scores;

  std::span<const double> row(std::size_t q) const {
    return {scores.data() + q * gallery.size(), gallery.size()};
  }

  /// Scores query q against the candidate gallery indices. Same identity and
  /// camera is junk; distractors and other identities are negatives.
  std::optional<QueryRecord> score(std::size_t q, std::vector<std::size_t> candidates) const {
    sort_by_score(candidates, row(q));
    const Sample& qs = query.samples[q];
    std::vector<Relevance> flags;
    flags.reserve(candidates.size());
    for (std::size_t j : candidates) {
      const Sample& gs = gallery.samples[j];
      if (gs.distractor || gs.identity != qs.identity) {
        flags.push_back(Relevance::Irrelevant);
      } else if (gs.camera == qs.camera) {
        flags.push_back(Relevance::Ignored);
      } else {
        flags.push_back(Relevance::Relevant);
      }
    }
    const auto ap = average_precision(flags);
    if (!ap) return std::nullopt;
    QueryRecord rec;
    rec.query_index = q;
    rec.ap = *ap;
    rec.first_hit_rank = *first_hit_rank(flags);
    return rec;
  }
};

struct Accumulator {
  std::vector<QueryRecord> records;
  std::size_t excluded = 0;

  void add(std::optional<QueryRecord> rec, std::size_t trial) {
    if (!rec) {
      ++excluded;
      return;
    }
    rec->trial = trial;
    records.push_back(*rec);
  }
  double map() const {
    if (records.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : records) s += r.ap;
    return s / static_cast<double>(records.size());
  }
  std::vector<double> cmc(std::size_t max_rank) const {
    std::vector<std::size_t> hits;
    hits.reserve(records.size());
    for (const auto& r : records) hits.push_back(r.first_hit_rank);
    return cmc_curve(hits, max_rank);
  }
};

std::set<int> cameras_of(const DescriptorSet& set) {
  std::set<int> cams;
  for (const auto& s : set.samples) cams.insert(s.camera);
  return cams;
}

void fill(EvalReport& report, const Accumulator& acc, std::size_t max_rank) {
  report.per_query = acc.records;
  report.excluded_queries = acc.excluded;
  report.map = acc.map();
  report.cmc = acc.cmc(max_rank);
}

}  // namespace

EvalReport evaluate(const DescriptorSet& query, const DescriptorSet& gallery, Protocol protocol,
                    const EvalOptions& options) {
  if (query.samples.size() != query.size() || gallery.samples.size() != gallery.size()) {
    throw InvalidArgument("evaluate: descriptor sets need their samples attached");
  }
  if (query.size() == 0 || gallery.size() == 0) throw InvalidArgument("evaluate: empty query or gallery set");
  if (options.max_rank == 0) throw InvalidArgument("evaluate: max_rank must be >= 1");
  for (const auto& s : query.samples) {
    if (s.distractor) throw InvalidArgument("evaluate: query set contains distractor " + s.path);
  }

  Scorer scorer{query, gallery, score_matrix(query, gallery)};
  EvalReport report;
  report.protocol = protocol;
  report.seed = options.seed;
  const std::size_t nq = query.size(), ng = gallery.size();
  std::vector<std::size_t> all(ng);
  std::iota(all.begin(), all.end(), std::size_t{0});

  std::set<int> cams = cameras_of(query);
  for (int c : cameras_of(gallery)) cams.insert(c);
  if (protocol != Protocol::SingleQuery && protocol != Protocol::DistractorSweep && cams.size() < 2) {
    throw InvalidArgument("evaluate: " + to_string(protocol) + " needs at least two cameras, found " +
                          std::to_string(cams.size()));
  }

  switch (protocol) {
    case Protocol::SingleQuery: {
      Accumulator acc;
      for (std::size_t q = 0; q < nq; ++q) acc.add(scorer.score(q, all), 0);
      fill(report, acc, options.max_rank);
      report.gallery_size = ng;
      break;
    }
    case Protocol::MultiShot: {
      Accumulator acc;
      for (std::size_t q = 0; q < nq; ++q) {
        std::vector<std::size_t> cand;
        for (std::size_t j = 0; j < ng; ++j) {
          if (gallery.samples[j].camera != query.samples[q].camera) cand.push_back(j);
        }
        acc.add(scorer.score(q, std::move(cand)), 0);
      }
      fill(report, acc, options.max_rank);
      report.gallery_size = ng;
      break;
    }
    case Protocol::SingleShot: {
      if (options.trials == 0) throw InvalidArgument("evaluate: single-shot needs at least one trial");
      if (options.single_shot_identities == 0) throw InvalidArgument("evaluate: single-shot identity count is 0");
      const Rng root = Rng(options.seed).stream("single-shot");
      Accumulator acc;
      for (std::size_t t = 0; t < options.trials; ++t) {
        for (std::size_t q = 0; q < nq; ++q) {
          const Sample& qs = query.samples[q];
          // identity -> gallery entries under other cameras, in index order
          std::map<int, std::vector<std::size_t>> pool;
          for (std::size_t j = 0; j < ng; ++j) {
            const Sample& gs = gallery.samples[j];
            if (!gs.distractor && gs.camera != qs.camera) pool[gs.identity].push_back(j);
          }
          Rng rng = root.stream(t).stream(q);
          std::vector<int> ids;
          for (const auto& [id, _] : pool) {
            if (id != qs.identity) ids.push_back(id);
          }
          const std::size_t keep_others =
              std::min(ids.size(), options.single_shot_identities - (pool.count(qs.identity) ? 1 : 0));
          // partial Fisher-Yates: the first keep_others entries are a uniform subset
          for (std::size_t i = 0; i < keep_others; ++i) {
            std::swap(ids[i], ids[i + rng.uniform_index(ids.size() - i)]);
          }
          ids.resize(keep_others);
          if (pool.count(qs.identity)) ids.push_back(qs.identity);
          std::sort(ids.begin(), ids.end());
          std::vector<std::size_t> cand;
          for (int id : ids) {
            const auto& entries = pool[id];
            cand.push_back(entries[rng.uniform_index(entries.size())]);
          }
          report.gallery_size = std::max(report.gallery_size, cand.size());
          acc.add(scorer.score(q, std::move(cand)), t);
        }
      }
      fill(report, acc, options.max_rank);
      report.trials = options.trials;
      break;
    }
    case Protocol::CameraMatrix: {
      Accumulator overall;
      std::vector<CameraCell> cells;
      double sum_r1 = 0.0, sum_map = 0.0;
      std::size_t scored_cells = 0;
      for (int pc : cams) {
        for (int gc : cams) {
          if (pc == gc) continue;
          std::vector<std::size_t> cand;
          for (std::size_t j = 0; j < ng; ++j) {
            if (gallery.samples[j].camera == gc) cand.push_back(j);
          }
          Accumulator acc;
          for (std::size_t q = 0; q < nq; ++q) {
            if (query.samples[q].camera != pc) continue;
            auto rec = scorer.score(q, cand);
            acc.add(rec, 0);
            overall.add(rec, 0);
          }
          CameraCell cell{pc, gc, acc.records.size(), 0.0, 0.0};
          if (!acc.records.empty()) {
            cell.rank1 = acc.cmc(1)[0];
            cell.map = acc.map();
            sum_r1 += cell.rank1;
            sum_map += cell.map;
            ++scored_cells;
          }
          cells.push_back(cell);
        }
      }
      fill(report, overall, options.max_rank);
      report.gallery_size = ng;
      if (scored_cells > 0) {
        report.camera_avg_rank1 = sum_r1 / static_cast<double>(scored_cells);
        report.camera_avg_map = sum_map / static_cast<double>(scored_cells);
      }
      report.camera_matrix = std::move(cells);
      break;
    }
    case Protocol::DistractorSweep: {
      std::vector<std::size_t> base, distractors;
      for (std::size_t j = 0; j < ng; ++j) (gallery.samples[j].distractor ? distractors : base).push_back(j);
      std::vector<std::size_t> sizes = options.gallery_sizes;
      if (sizes.empty()) sizes = {base.size(), base.size() + distractors.size()};
      std::vector<SweepPoint> sweep;
      for (std::size_t size : sizes) {
        if (size < base.size() || size - base.size() > distractors.size()) {
          throw InvalidArgument("evaluate: gallery size " + std::to_string(size) + " outside [" +
                                std::to_string(base.size()) + ", " +
                                std::to_string(base.size() + distractors.size()) + "]");
        }
        const std::size_t m = size - base.size();
        std::vector<std::size_t> cand = base;
        cand.insert(cand.end(), distractors.begin(), distractors.begin() + static_cast<std::ptrdiff_t>(m));
        Accumulator acc;
        for (std::size_t q = 0; q < nq; ++q) acc.add(scorer.score(q, cand), 0);
        sweep.push_back({size, m, acc.records.empty() ? 0.0 : acc.cmc(1)[0], acc.map()});
        fill(report, acc, options.max_rank);
        report.gallery_size = size;
      }
      report.gallery_sweep = std::move(sweep);
      break;
    }
  }
  return report;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  char buf[160];
  out << "protocol: " << to_string(r.protocol) << "\n";
  out << "scored queries: " << r.per_query.size() << " (excluded without a match: " << r.excluded_queries
      << ")\n";
  if (r.protocol == Protocol::SingleShot) out << "trials: " << r.trials << ", seed: " << r.seed << "\n";
  out << "gallery size: " << r.gallery_size << "\n";
  std::snprintf(buf, sizeof(buf), "rank-1: %.6f\nmAP: %.6f\n", r.rank1(), r.map);
  out << buf;
  out << "cmc:";
  for (std::size_t k = 0; k < r.cmc.size(); ++k) {
    std::snprintf(buf, sizeof(buf), " %zu:%.6f", k + 1, r.cmc[k]);
    out << buf;
  }
  out << "\n";
  if (r.camera_matrix) {
    out << "camera matrix (probe -> gallery: rank-1, mAP, queries):\n";
    for (const auto& c : *r.camera_matrix) {
      std::snprintf(buf, sizeof(buf), "  %d -> %d: %.6f %.6f %zu\n", c.probe_camera, c.gallery_camera, c.rank1,
                    c.map, c.queries);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "cross-camera average: rank-1 %.6f, mAP %.6f\n", r.camera_avg_rank1,
                  r.camera_avg_map);
    out << buf;
  }
  if (r.gallery_sweep) {
    out << "gallery sweep (size, distractors, rank-1, mAP):\n";
    for (const auto& p : *r.gallery_sweep) {
      std::snprintf(buf, sizeof(buf), "  %zu %zu %.6f %.6f\n", p.gallery_size, p.distractors, p.rank1, p.map);
      out << buf;
    }
  }
  return out.str();
}

std::string format_per_query_csv(const EvalReport& report, const DescriptorSet& query) {
  std::string out = "trial,query_index,path,identity,camera,ap,first_hit_rank\n";
  char buf[96];
  for (const auto& rec : report.per_query) {
    const Sample& s = query.samples.at(rec.query_index);
    std::snprintf(buf, sizeof(buf), ",%d,%d,%.9f,%zu\n", s.identity, s.camera, rec.ap, rec.first_hit_rank);
    out += std::to_string(rec.trial) + "," + std::to_string(rec.query_index) + "," + s.path + buf;
  }
  return out;
}

}  // namespace idv
