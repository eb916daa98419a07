#include "idv/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "idv/error.hpp"

namespace idv {
namespace {

std::string dim_error(const char* op, const std::string& what, std::size_t got,
                      std::size_t expected) {
  return std::string(op) + ": " + what + " is " + std::to_string(got) + ", expected " +
         std::to_string(expected);
}

void require_same_graph(const char* op, Var a, Var b) {
  if (&a.graph() != &b.graph()) {
    throw InvalidArgument(std::string(op) + ": operands belong to different graphs");
  }
}

void require_rank(const char* op, const char* name, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw InvalidArgument(std::string(op) + ": " + name + " must have rank " +
                          std::to_string(rank) + ", got shape " + shape_string(t.shape()));
  }
}

std::uint64_t hash_mask(const std::vector<std::size_t>& idx) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto i : idx) {
    h ^= static_cast<std::uint64_t>(i);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct ConvGeometry {
  std::size_t batch, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  bool batched;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
};

// cols[(c*kh + i)*kw + j, oy*wo + ox] = input[c, oy*s + i - pad, ox*s + j - pad]
void im2col(const ConvGeometry& g, const double* image, std::vector<double>& cols) {
  cols.assign(g.patch() * g.pixels(), 0.0);
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = cols.data() + ((c * g.kh + i) * g.kw + j) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                                   static_cast<std::ptrdiff_t>(g.pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) continue;
          const double* src = image + (c * g.h + static_cast<std::size_t>(y)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                                     static_cast<std::ptrdiff_t>(g.pad);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.w)) continue;
            row[oy * g.wo + ox] = src[x];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const std::vector<double>& cols, double* image_grad) {
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = cols.data() + ((c * g.kh + i) * g.kw + j) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                                   static_cast<std::ptrdiff_t>(g.pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double* dst = image_grad + (c * g.h + static_cast<std::size_t>(y)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                                     static_cast<std::ptrdiff_t>(g.pad);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dst[x] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

ConvGeometry conv_geometry(const Tensor& in, const Tensor& wt, const Tensor& b,
                           std::size_t stride, std::size_t pad) {
  constexpr const char* op = "conv2d";
  if (stride == 0) throw InvalidArgument("conv2d: stride must be >= 1");
  ConvGeometry g{};
  if (in.rank() == 3) {
    g.batched = false;
    g.batch = 1;
    g.cin = in.dim(0);
    g.h = in.dim(1);
    g.w = in.dim(2);
  } else if (in.rank() == 4) {
    g.batched = true;
    g.batch = in.dim(0);
    g.cin = in.dim(1);
    g.h = in.dim(2);
    g.w = in.dim(3);
  } else {
    throw InvalidArgument("conv2d: input must be [C,H,W] or [N,C,H,W], got " +
                          shape_string(in.shape()));
  }
  require_rank(op, "weight", wt, 4);
  require_rank(op, "bias", b, 1);
  g.cout = wt.dim(0);
  g.kh = wt.dim(2);
  g.kw = wt.dim(3);
  if (wt.dim(1) != g.cin) {
    throw InvalidArgument(dim_error(op, "input channel count (weight dim 1)", wt.dim(1), g.cin));
  }
  if (b.dim(0) != g.cout) {
    throw InvalidArgument(dim_error(op, "bias length", b.dim(0), g.cout));
  }
  if (g.h + 2 * pad < g.kh) {
    throw InvalidArgument(dim_error(op, "kernel height exceeds padded input height; kernel height",
                                    g.kh, g.h + 2 * pad));
  }
  if (g.w + 2 * pad < g.kw) {
    throw InvalidArgument(dim_error(op, "kernel width exceeds padded input width; kernel width",
                                    g.kw, g.w + 2 * pad));
  }
  g.stride = stride;
  g.pad = pad;
  g.ho = (g.h + 2 * pad - g.kh) / stride + 1;
  g.wo = (g.w + 2 * pad - g.kw) / stride + 1;
  return g;
}

}  // namespace

Var conv2d(Var input, Var weight, Var bias, std::size_t stride, std::size_t padding) {
  require_same_graph("conv2d", input, weight);
  require_same_graph("conv2d", input, bias);
  Graph& gr = input.graph();
  const Tensor& in = input.value();
  const Tensor& wt = weight.value();
  const Tensor& b = bias.value();
  const ConvGeometry g = conv_geometry(in, wt, b, stride, padding);

  Shape out_shape = g.batched ? Shape{g.batch, g.cout, g.ho, g.wo} : Shape{g.cout, g.ho, g.wo};
  Tensor out(out_shape, 0.0);
  const std::size_t patch = g.patch();
  const std::size_t pixels = g.pixels();
  const std::size_t in_stride = g.cin * g.h * g.w;
  const std::size_t out_stride = g.cout * pixels;

  // Keep the unfolded patches for the weight gradient.
  auto cols_per_image = std::make_shared<std::vector<std::vector<double>>>(g.batch);
  for (std::size_t n = 0; n < g.batch; ++n) {
    auto& cols = (*cols_per_image)[n];
    im2col(g, in.data() + n * in_stride, cols);
    double* o = out.data() + n * out_stride;
    for (std::size_t co = 0; co < g.cout; ++co) {
      double* orow = o + co * pixels;
      std::fill(orow, orow + pixels, b[co]);
      const double* wrow = wt.data() + co * patch;
      for (std::size_t k = 0; k < patch; ++k) {
        const double wk = wrow[k];
        const double* crow = cols.data() + k * pixels;
        for (std::size_t p = 0; p < pixels; ++p) orow[p] += wk * crow[p];
      }
    }
  }

  const std::size_t in_id = input.id(), w_id = weight.id(), b_id = bias.id();
  return gr.record("conv2d", std::move(out), {input, weight, bias},
                   [g, cols_per_image, in_id, w_id, b_id](Graph& graph, std::size_t self) {
    const Tensor& gout = graph.grad(self);
    const Tensor& wt = graph.value(w_id);
    const std::size_t patch = g.patch();
    const std::size_t pixels = g.pixels();
    const std::size_t in_stride = g.cin * g.h * g.w;
    const std::size_t out_stride = g.cout * pixels;
    const bool need_in = graph.requires_grad(in_id);
    const bool need_w = graph.requires_grad(w_id);
    const bool need_b = graph.requires_grad(b_id);
    std::vector<double> dcols;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const double* go = gout.data() + n * out_stride;
      const auto& cols = (*cols_per_image)[n];
      if (need_w) {
        double* dw = graph.grad_mut(w_id).data();
        for (std::size_t co = 0; co < g.cout; ++co) {
          const double* grow = go + co * pixels;
          for (std::size_t k = 0; k < patch; ++k) {
            const double* crow = cols.data() + k * pixels;
            double acc = 0.0;
            for (std::size_t p = 0; p < pixels; ++p) acc += grow[p] * crow[p];
            dw[co * patch + k] += acc;
          }
        }
      }
      if (need_b) {
        double* db = graph.grad_mut(b_id).data();
        for (std::size_t co = 0; co < g.cout; ++co) {
          const double* grow = go + co * pixels;
          double acc = 0.0;
          for (std::size_t p = 0; p < pixels; ++p) acc += grow[p];
          db[co] += acc;
        }
      }
      if (need_in) {
        dcols.assign(patch * pixels, 0.0);
        for (std::size_t co = 0; co < g.cout; ++co) {
          const double* grow = go + co * pixels;
          const double* wrow = wt.data() + co * patch;
          for (std::size_t k = 0; k < patch; ++k) {
            const double wk = wrow[k];
            double* drow = dcols.data() + k * pixels;
            for (std::size_t p = 0; p < pixels; ++p) drow[p] += wk * grow[p];
          }
        }
        col2im_add(g, dcols, graph.grad_mut(in_id).data() + n * in_stride);
      }
    }
  });
}

Var relu(Var x) {
  Graph& gr = x.graph();
  const Tensor& in = x.value();
  Tensor out(in.shape(), 0.0);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  if (gr.tracking_branches()) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] > 0.0) active.push_back(i);
    }
    gr.note_branch(hash_mask(active));
  }
  const std::size_t x_id = x.id();
  return gr.record("relu", std::move(out), {x}, [x_id](Graph& graph, std::size_t self) {
    const Tensor& in = graph.value(x_id);
    const Tensor& go = graph.grad(self);
    Tensor& gi = graph.grad_mut(x_id);
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] > 0.0) gi[i] += go[i];
    }
  });
}

Var maxpool2(Var x) {
  Graph& gr = x.graph();
  const Tensor& in = x.value();
  require_rank("maxpool2", "input", in, 3);
  const std::size_t c = in.dim(0), h = in.dim(1), w = in.dim(2);
  if (h % 2 != 0) throw InvalidArgument("maxpool2: height " + std::to_string(h) + " is odd");
  if (w % 2 != 0) throw InvalidArgument("maxpool2: width " + std::to_string(w) + " is odd");
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor out({c, ho, wo}, 0.0);
  auto argmax = std::make_shared<std::vector<std::size_t>>(c * ho * wo);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = (ch * h + 2 * oy) * w + 2 * ox;
        double best_v = in[best];
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (ch * h + 2 * oy + dy) * w + 2 * ox + dx;
            if (in[idx] > best_v) {
              best_v = in[idx];
              best = idx;
            }
          }
        }
        const std::size_t o = (ch * ho + oy) * wo + ox;
        out[o] = best_v;
        (*argmax)[o] = best;
      }
    }
  }
  if (gr.tracking_branches()) gr.note_branch(hash_mask(*argmax));
  const std::size_t x_id = x.id();
  return gr.record("maxpool2", std::move(out), {x}, [argmax, x_id](Graph& graph, std::size_t self) {
    const Tensor& go = graph.grad(self);
    Tensor& gi = graph.grad_mut(x_id);
    for (std::size_t o = 0; o < go.size(); ++o) gi[(*argmax)[o]] += go[o];
  });
}

Var global_max_pool(Var x) {
  Graph& gr = x.graph();
  const Tensor& in = x.value();
  require_rank("global_max_pool", "input", in, 3);
  const std::size_t c = in.dim(0), hw = in.dim(1) * in.dim(2);
  Tensor out({c}, 0.0);
  auto argmax = std::make_shared<std::vector<std::size_t>>(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::size_t best = ch * hw;
    for (std::size_t i = 1; i < hw; ++i) {
      if (in[ch * hw + i] > in[best]) best = ch * hw + i;
    }
    out[ch] = in[best];
    (*argmax)[ch] = best;
  }
  if (gr.tracking_branches()) gr.note_branch(hash_mask(*argmax));
  const std::size_t x_id = x.id();
  return gr.record("global_max_pool", std::move(out), {x},
                   [argmax, x_id](Graph& graph, std::size_t self) {
    const Tensor& go = graph.grad(self);
    Tensor& gi = graph.grad_mut(x_id);
    for (std::size_t ch = 0; ch < go.size(); ++ch) gi[(*argmax)[ch]] += go[ch];
  });
}

Var linear(Var x, Var weight, Var bias) {
  require_same_graph("linear", x, weight);
  require_same_graph("linear", x, bias);
  Graph& gr = x.graph();
  const Tensor& in = x.value();
  const Tensor& wt = weight.value();
  const Tensor& b = bias.value();
  require_rank("linear", "input", in, 1);
  require_rank("linear", "weight", wt, 2);
  require_rank("linear", "bias", b, 1);
  const std::size_t dout = wt.dim(0), din = wt.dim(1);
  if (in.dim(0) != din) throw InvalidArgument(dim_error("linear", "input length (weight dim 1)", in.dim(0), din));
  if (b.dim(0) != dout) throw InvalidArgument(dim_error("linear", "bias length", b.dim(0), dout));
  Tensor out({dout}, 0.0);
  for (std::size_t o = 0; o < dout; ++o) {
    const double* row = wt.data() + o * din;
    double acc = 0.0;
    for (std::size_t i = 0; i < din; ++i) acc += row[i] * in[i];
    out[o] = acc + b[o];
  }
  const std::size_t x_id = x.id(), w_id = weight.id(), b_id = bias.id();
  return gr.record("linear", std::move(out), {x, weight, bias},
                   [x_id, w_id, b_id, din, dout](Graph& graph, std::size_t self) {
    const Tensor& go = graph.grad(self);
    if (graph.requires_grad(w_id)) {
      const Tensor& in = graph.value(x_id);
      Tensor& gw = graph.grad_mut(w_id);
      for (std::size_t o = 0; o < dout; ++o) {
        double* row = gw.data() + o * din;
        const double g = go[o];
        for (std::size_t i = 0; i < din; ++i) row[i] += g * in[i];
      }
    }
    if (graph.requires_grad(b_id)) {
      Tensor& gb = graph.grad_mut(b_id);
      for (std::size_t o = 0; o < dout; ++o) gb[o] += go[o];
    }
    if (graph.requires_grad(x_id)) {
      const Tensor& wt = graph.value(w_id);
      Tensor& gx = graph.grad_mut(x_id);
      for (std::size_t o = 0; o < dout; ++o) {
        const double* row = wt.data() + o * din;
        const double g = go[o];
        for (std::size_t i = 0; i < din; ++i) gx[i] += g * row[i];
      }
    }
  });
}

Var softmax(Var logits) {
  Graph& gr = logits.graph();
  const Tensor& z = logits.value();
  require_rank("softmax", "logits", z, 1);
  if (z.size() < 2) throw InvalidArgument("softmax: need at least 2 logits");
  const double zmax = *std::max_element(z.values().begin(), z.values().end());
  Tensor p(z.shape(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - zmax);
    total += p[i];
  }
  for (std::size_t i = 0; i < z.size(); ++i) p[i] /= total;
  const std::size_t z_id = logits.id();
  return gr.record("softmax", std::move(p), {logits}, [z_id](Graph& graph, std::size_t self) {
    const Tensor& p = graph.value(self);
    const Tensor& go = graph.grad(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dot += go[i] * p[i];
    Tensor& gz = graph.grad_mut(z_id);
    for (std::size_t i = 0; i < p.size(); ++i) gz[i] += p[i] * (go[i] - dot);
  });
}

Var dropout(Var x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw InvalidArgument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  Graph& gr = x.graph();
  const Tensor& in = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(in.size());
  Tensor out(in.shape(), 0.0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double m = rng.uniform() < rate ? 0.0 : keep_scale;
    (*mask)[i] = m;
    out[i] = in[i] * m;
  }
  const std::size_t x_id = x.id();
  return gr.record("dropout", std::move(out), {x}, [mask, x_id](Graph& graph, std::size_t self) {
    const Tensor& go = graph.grad(self);
    Tensor& gi = graph.grad_mut(x_id);
    for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i] * (*mask)[i];
  });
}

Var square_diff(Var a, Var b) {
  require_same_graph("square_diff", a, b);
  Graph& gr = a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) {
    throw InvalidArgument("square_diff: shape " + shape_string(av.shape()) + " vs " +
                          shape_string(bv.shape()));
  }
  Tensor out(av.shape(), 0.0);
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    out[i] = d * d;
  }
  const std::size_t a_id = a.id(), b_id = b.id();
  return gr.record("square_diff", std::move(out), {a, b}, [a_id, b_id](Graph& graph, std::size_t self) {
    const Tensor& av = graph.value(a_id);
    const Tensor& bv = graph.value(b_id);
    const Tensor& go = graph.grad(self);
    double* ga = graph.requires_grad(a_id) ? graph.grad_mut(a_id).data() : nullptr;
    double* gb = graph.requires_grad(b_id) ? graph.grad_mut(b_id).data() : nullptr;
    for (std::size_t i = 0; i < go.size(); ++i) {
      const double g = 2.0 * (av[i] - bv[i]) * go[i];
      if (ga) ga[i] += g;
      if (gb) gb[i] -= g;
    }
  });
}

Var flatten(Var x) {
  Graph& gr = x.graph();
  Tensor out = x.value().reshaped({x.value().size()});
  const std::size_t x_id = x.id();
  return gr.record("flatten", std::move(out), {x}, [x_id](Graph& graph, std::size_t self) {
    const Tensor& go = graph.grad(self);
    Tensor& gi = graph.grad_mut(x_id);
    for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i];
  });
}

Var sum(Var x) {
  Graph& gr = x.graph();
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const std::size_t x_id = x.id();
  return gr.record("sum", Tensor::scalar(total), {x}, [x_id](Graph& graph, std::size_t self) {
    const double g = graph.grad(self)[0];
    Tensor& gi = graph.grad_mut(x_id);
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g;
  });
}

Var add(Var a, Var b) {
  require_same_graph("add", a, b);
  Graph& gr = a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) {
    throw InvalidArgument("add: shape " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  }
  Tensor out = av;
  add_into(out, bv);
  const std::size_t a_id = a.id(), b_id = b.id();
  return gr.record("add", std::move(out), {a, b}, [a_id, b_id](Graph& graph, std::size_t self) {
    const Tensor& go = graph.grad(self);
    if (graph.requires_grad(a_id)) add_into(graph.grad_mut(a_id), go);
    if (graph.requires_grad(b_id)) add_into(graph.grad_mut(b_id), go);
  });
}

Var scale(Var x, double factor) {
  Graph& gr = x.graph();
  Tensor out = x.value();
  for (auto& v : out.values()) v *= factor;
  const std::size_t x_id = x.id();
  return gr.record("scale", std::move(out), {x}, [x_id, factor](Graph& graph, std::size_t self) {
    add_into(graph.grad_mut(x_id), graph.grad(self), factor);
  });
}

Var square(Var x) {
  Graph& gr = x.graph();
  Tensor out = x.value();
  for (auto& v : out.values()) v *= v;
  const std::size_t x_id = x.id();
  return gr.record("square", std::move(out), {x}, [x_id](Graph& graph, std::size_t self) {
    const Tensor& in = graph.value(x_id);
    const Tensor& go = graph.grad(self);
    Tensor& gi = graph.grad_mut(x_id);
    for (std::size_t i = 0; i < in.size(); ++i) gi[i] += 2.0 * in[i] * go[i];
  });
}

Var neg_log_at(Var probs, std::size_t index) {
  Graph& gr = probs.graph();
  const Tensor& p = probs.value();
  if (index >= p.size()) {
    throw InvalidArgument("neg_log_at: index " + std::to_string(index) + " out of range for " +
                          std::to_string(p.size()) + " classes");
  }
  const std::size_t p_id = probs.id();
  if (gr.op_name(p_id) == "softmax") {
    // Cross-entropy on the logits: log-sum-exp(z) - z[index]. Stays finite
    // when p[index] underflows to zero.
    const std::size_t z_id = gr.inputs(p_id).front();
    const Tensor& z = gr.value(z_id);
    const double zmax = *std::max_element(z.values().begin(), z.values().end());
    double total = 0.0;
    for (double v : z.values()) total += std::exp(v - zmax);
    const double loss = zmax + std::log(total) - z[index];
    return gr.record("neg_log", Tensor::scalar(loss), {probs}, [p_id, z_id, index](Graph& graph, std::size_t self) {
      const double g = graph.grad(self)[0];
      const Tensor& pv = graph.value(p_id);
      Tensor& gz = graph.grad_mut(z_id);
      for (std::size_t i = 0; i < pv.size(); ++i) gz[i] += g * (pv[i] - (i == index ? 1.0 : 0.0));
    });
  }
  return gr.record("neg_log", Tensor::scalar(-std::log(p[index])), {probs},
                   [p_id, index](Graph& graph, std::size_t self) {
    const double g = graph.grad(self)[0];
    graph.grad_mut(p_id)[index] -= g / graph.value(p_id)[index];
  });
}

}  // namespace idv
