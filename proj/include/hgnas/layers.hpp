#pragma once

// Message-passing kernels over edge lists, built on the autodiff tape.

#include "hgnas/autodiff.hpp"
#include "hgnas/graph.hpp"
#include "hgnas/space.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace hgnas {

// Edges grouped by target: in-edges of target t are positions offsets[t]..offsets[t+1].
struct Adjacency {
  Index num_src = 0;
  Index num_dst = 0;
  std::vector<Index> src;
  std::vector<Index> dst;
  std::vector<Index> offsets;
  std::vector<double> out_deg;
  std::vector<double> in_deg;

  std::size_t num_edges() const { return src.size(); }

  static Adjacency from_edges(const std::vector<Edge>& edges, Index num_src, Index num_dst) {
    Adjacency a;
    a.num_src = num_src;
    a.num_dst = num_dst;
    std::vector<Edge> sorted = edges;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Edge& x, const Edge& y) { return x.second < y.second; });
    a.offsets.assign(static_cast<std::size_t>(num_dst) + 1, 0);
    a.out_deg.assign(static_cast<std::size_t>(num_src), 0.0);
    a.in_deg.assign(static_cast<std::size_t>(num_dst), 0.0);
    for (const auto& [s, d] : sorted) {
      if (s < 0 || s >= num_src || d < 0 || d >= num_dst) throw std::out_of_range("edge endpoint out of range");
      a.src.push_back(s);
      a.dst.push_back(d);
      a.out_deg[static_cast<std::size_t>(s)] += 1;
      a.in_deg[static_cast<std::size_t>(d)] += 1;
      a.offsets[static_cast<std::size_t>(d) + 1] += 1;
    }
    std::partial_sum(a.offsets.begin(), a.offsets.end(), a.offsets.begin());
    return a;
  }

  static Adjacency identity(Index n) {
    std::vector<Edge> e;
    e.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) e.emplace_back(i, i);
    return from_edges(e, n, n);
  }
};

namespace ad {

// out[t] = sum over edges (s, t) of z[s] / sqrt(outdeg(s) * indeg(t)).
template <typename Scalar>
Var<Scalar> gcn_propagate(Var<Scalar> z, const Adjacency& adj) {
  if (z.rows() != adj.num_src) throw std::invalid_argument("gcn_propagate: source rows differ from adjacency");
  std::vector<Scalar> w(adj.num_edges());
  for (std::size_t e = 0; e < w.size(); ++e)
    w[e] = Scalar(1) / std::sqrt(static_cast<Scalar>(adj.out_deg[static_cast<std::size_t>(adj.src[e])] *
                                                     adj.in_deg[static_cast<std::size_t>(adj.dst[e])]));
  const auto& zv = z.value();
  RowMatrix<Scalar> out = RowMatrix<Scalar>::Zero(adj.num_dst, zv.cols());
  for (std::size_t e = 0; e < w.size(); ++e) out.row(adj.dst[e]) += w[e] * zv.row(adj.src[e]);
  return z.tape->record(std::move(out), {z}, [z, &adj, w = std::move(w)](Tape<Scalar>& tp, std::size_t self) {
    const auto& g = tp.upstream(self);
    auto& gz = tp.grad_buffer(z.id);
    for (std::size_t e = 0; e < w.size(); ++e) gz.row(adj.src[e]) += w[e] * g.row(adj.dst[e]);
  });
}

// Graph attention: score_e = leaky_relu(a . [zs[s] || zt[t]]), softmax over each target's
// in-edges, out[t] = sum_e alpha_e zs[s]. `a` is 1 x 2h.
template <typename Scalar>
Var<Scalar> gat_propagate(Var<Scalar> zs, Var<Scalar> zt, Var<Scalar> a, const Adjacency& adj,
                          Scalar slope = Scalar(0.2)) {
  const Index h = zs.cols();
  if (zs.rows() != adj.num_src || zt.rows() != adj.num_dst || zt.cols() != h || a.rows() != 1 || a.cols() != 2 * h)
    throw std::invalid_argument("gat_propagate: shape mismatch");
  const auto& zsv = zs.value();
  const auto& ztv = zt.value();
  const auto al = a.value().row(0).head(h);
  const auto ar = a.value().row(0).tail(h);
  const std::size_t m = adj.num_edges();
  std::vector<Scalar> pre(m), alpha(m);
  for (std::size_t e = 0; e < m; ++e) pre[e] = al.dot(zsv.row(adj.src[e])) + ar.dot(ztv.row(adj.dst[e]));
  RowMatrix<Scalar> out = RowMatrix<Scalar>::Zero(adj.num_dst, h);
  for (Index t = 0; t < adj.num_dst; ++t) {
    const auto b = static_cast<std::size_t>(adj.offsets[static_cast<std::size_t>(t)]);
    const auto end = static_cast<std::size_t>(adj.offsets[static_cast<std::size_t>(t) + 1]);
    if (b == end) continue;
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t e = b; e < end; ++e) mx = std::max(mx, pre[e] > 0 ? pre[e] : slope * pre[e]);
    Scalar sum = 0;
    for (std::size_t e = b; e < end; ++e) {
      alpha[e] = std::exp((pre[e] > 0 ? pre[e] : slope * pre[e]) - mx);
      sum += alpha[e];
    }
    for (std::size_t e = b; e < end; ++e) {
      alpha[e] /= sum;
      out.row(t) += alpha[e] * zsv.row(adj.src[e]);
    }
  }
  return zs.tape->record(
      std::move(out), {zs, zt, a},
      [zs, zt, a, &adj, slope, h, pre = std::move(pre), alpha = std::move(alpha)](Tape<Scalar>& tp, std::size_t self) {
        const auto& g = tp.upstream(self);
        const auto& zsv = tp.value(zs.id);
        const auto& ztv = tp.value(zt.id);
        const RowMatrix<Scalar> av = tp.value(a.id);
        RowMatrix<Scalar> gzs = RowMatrix<Scalar>::Zero(zsv.rows(), h);
        RowMatrix<Scalar> gzt = RowMatrix<Scalar>::Zero(ztv.rows(), h);
        RowMatrix<Scalar> ga = RowMatrix<Scalar>::Zero(1, 2 * h);
        std::vector<Scalar> dalpha;
        for (Index t = 0; t < adj.num_dst; ++t) {
          const auto b = static_cast<std::size_t>(adj.offsets[static_cast<std::size_t>(t)]);
          const auto end = static_cast<std::size_t>(adj.offsets[static_cast<std::size_t>(t) + 1]);
          if (b == end) continue;
          dalpha.assign(end - b, 0);
          Scalar weighted = 0;
          for (std::size_t e = b; e < end; ++e) {
            gzs.row(adj.src[e]) += alpha[e] * g.row(t);
            dalpha[e - b] = g.row(t).dot(zsv.row(adj.src[e]));
            weighted += alpha[e] * dalpha[e - b];
          }
          for (std::size_t e = b; e < end; ++e) {
            const Scalar dscore = alpha[e] * (dalpha[e - b] - weighted);
            const Scalar dpre = dscore * (pre[e] > 0 ? Scalar(1) : slope);
            ga.leftCols(h) += dpre * zsv.row(adj.src[e]);
            ga.rightCols(h) += dpre * ztv.row(t);
            gzs.row(adj.src[e]) += dpre * av.leftCols(h);
            gzt.row(t) += dpre * av.rightCols(h);
          }
        }
        tp.accumulate(zs.id, gzs);
        tp.accumulate(zt.id, gzt);
        tp.accumulate(a.id, ga);
      });
}

namespace detail {

// Column-wise max over each target's in-edges; argmax holds the winning edge's source row.
template <typename Scalar>
RowMatrix<Scalar> scatter_max(const RowMatrix<Scalar>& z, const Adjacency& adj, std::vector<Index>& argmax) {
  const Index h = z.cols();
  RowMatrix<Scalar> out = RowMatrix<Scalar>::Zero(adj.num_dst, h);
  argmax.assign(static_cast<std::size_t>(adj.num_dst * h), -1);
  for (Index t = 0; t < adj.num_dst; ++t) {
    const auto b = static_cast<std::size_t>(adj.offsets[static_cast<std::size_t>(t)]);
    const auto end = static_cast<std::size_t>(adj.offsets[static_cast<std::size_t>(t) + 1]);
    if (b == end) continue;
    for (Index k = 0; k < h; ++k) {
      Index best = adj.src[b];
      for (std::size_t e = b + 1; e < end; ++e)
        if (z(adj.src[e], k) > z(best, k)) best = adj.src[e];
      out(t, k) = z(best, k);
      argmax[static_cast<std::size_t>(t * h + k)] = best;
    }
  }
  return out;
}

}  // namespace detail

// out[t] = max over in-edges of zs[s]; zeros where t has no in-edge.
template <typename Scalar>
Var<Scalar> sage_max(Var<Scalar> zs, const Adjacency& adj) {
  if (zs.rows() != adj.num_src) throw std::invalid_argument("sage_max: source rows differ from adjacency");
  std::vector<Index> argmax;
  RowMatrix<Scalar> out = detail::scatter_max(zs.value(), adj, argmax);
  const Index h = zs.cols();
  return zs.tape->record(std::move(out), {zs}, [zs, h, argmax = std::move(argmax)](Tape<Scalar>& tp, std::size_t self) {
    const auto& g = tp.upstream(self);
    auto& gz = tp.grad_buffer(zs.id);
    for (Index t = 0; t < g.rows(); ++t)
      for (Index k = 0; k < h; ++k) {
        const Index s = argmax[static_cast<std::size_t>(t * h + k)];
        if (s >= 0) gz(s, k) += g(t, k);
      }
  });
}

// out[t] = max over in-edges of (zs[s] - zt[t]); zeros where t has no in-edge.
template <typename Scalar>
Var<Scalar> edge_max(Var<Scalar> zs, Var<Scalar> zt, const Adjacency& adj) {
  if (zs.rows() != adj.num_src || zt.rows() != adj.num_dst || zs.cols() != zt.cols())
    throw std::invalid_argument("edge_max: shape mismatch");
  std::vector<Index> argmax;
  RowMatrix<Scalar> out = detail::scatter_max(zs.value(), adj, argmax);
  const Index h = zs.cols();
  for (Index t = 0; t < out.rows(); ++t)
    if (adj.offsets[static_cast<std::size_t>(t) + 1] > adj.offsets[static_cast<std::size_t>(t)])
      out.row(t) -= zt.value().row(t);
  return zs.tape->record(std::move(out), {zs, zt}, [zs, zt, h, argmax = std::move(argmax)](Tape<Scalar>& tp, std::size_t self) {
    const auto& g = tp.upstream(self);
    if (tp.needs_grad(zs.id)) {
      auto& gz = tp.grad_buffer(zs.id);
      for (Index t = 0; t < g.rows(); ++t)
        for (Index k = 0; k < h; ++k) {
          const Index s = argmax[static_cast<std::size_t>(t * h + k)];
          if (s >= 0) gz(s, k) += g(t, k);
        }
    }
    if (tp.needs_grad(zt.id)) {
      auto& gt = tp.grad_buffer(zt.id);
      for (Index t = 0; t < g.rows(); ++t)
        if (argmax[static_cast<std::size_t>(t * h)] >= 0) gt.row(t) -= g.row(t);
    }
  });
}

}  // namespace ad

template <typename Scalar>
struct SlotParams {
  std::optional<ad::Var<Scalar>> w;    // h x h relation weight
  std::optional<ad::Var<Scalar>> att;  // 1 x 2h, gat only
};

// Message of one relation slot for every node of the slot's target type.
template <typename Scalar>
ad::Var<Scalar> relation_message(GnnOp op, ad::Var<Scalar> x_src, ad::Var<Scalar> x_dst, const Adjacency& adj,
                                 const SlotParams<Scalar>& p, const std::string& slot) {
  auto& tape = *x_src.tape;
  if (x_src.rows() != adj.num_src || x_dst.rows() != adj.num_dst)
    throw std::invalid_argument("slot " + slot + ": feature rows do not match the adjacency");
  if (op == GnnOp::zero) return tape.constant(RowMatrix<Scalar>::Zero(adj.num_dst, x_dst.cols()));
  if (!p.w) throw std::invalid_argument("slot " + slot + ": missing relation weight");
  if (x_src.cols() != p.w->rows() || x_dst.cols() != p.w->rows())
    throw std::invalid_argument("slot " + slot + ": feature width does not match the relation weight");
  const ad::Var<Scalar> zs = ad::matmul(x_src, *p.w);
  switch (op) {
    case GnnOp::gcn:
      return ad::gcn_propagate(zs, adj);
    case GnnOp::gat:
      if (!p.att) throw std::invalid_argument("slot " + slot + ": gat needs an attention vector");
      return ad::gat_propagate(zs, ad::matmul(x_dst, *p.w), *p.att, adj);
    case GnnOp::edge:
      return ad::edge_max(zs, ad::matmul(x_dst, *p.w), adj);
    case GnnOp::sage:
      return ad::sage_max(zs, adj);
    case GnnOp::zero:
      break;
  }
  throw std::logic_error("unhandled operator");
}

template <typename Scalar>
struct AggrParams {
  std::optional<ad::Var<Scalar>> lstm_wx;  // h x 4h, gate blocks i, f, g, o
  std::optional<ad::Var<Scalar>> lstm_wh;  // h x 4h
  std::optional<ad::Var<Scalar>> att_q;    // h x 1
};

// Combines the messages of one target type; `messages` must follow canonical slot order.
template <typename Scalar>
ad::Var<Scalar> aggregate(Aggr kind, const std::vector<ad::Var<Scalar>>& messages, const AggrParams<Scalar>& p = {}) {
  if (messages.empty()) throw std::invalid_argument("aggregate: no messages");
  for (const auto& m : messages)
    if (m.rows() != messages.front().rows() || m.cols() != messages.front().cols())
      throw std::invalid_argument("aggregate: messages differ in shape");
  auto& tape = *messages.front().tape;
  const Index n = messages.front().rows(), h = messages.front().cols();
  switch (kind) {
    case Aggr::sum: {
      auto acc = messages.front();
      for (std::size_t i = 1; i < messages.size(); ++i) acc = acc + messages[i];
      return acc;
    }
    case Aggr::mean: {
      auto acc = aggregate(Aggr::sum, messages, p);
      return ad::scale(acc, Scalar(1) / static_cast<Scalar>(messages.size()));
    }
    case Aggr::max: {
      auto acc = messages.front();
      for (std::size_t i = 1; i < messages.size(); ++i) acc = ad::maximum(acc, messages[i]);
      return acc;
    }
    case Aggr::lstm: {
      if (!p.lstm_wx || !p.lstm_wh) throw std::invalid_argument("aggregate: lstm parameters missing");
      auto hidden = tape.constant(RowMatrix<Scalar>::Zero(n, h));
      auto cell = tape.constant(RowMatrix<Scalar>::Zero(n, h));
      for (const auto& m : messages) {
        auto gates = ad::matmul(m, *p.lstm_wx) + ad::matmul(hidden, *p.lstm_wh);
        auto i = ad::sigmoid(ad::block_cols(gates, 0, h));
        auto f = ad::sigmoid(ad::block_cols(gates, h, h));
        auto g = ad::tanh(ad::block_cols(gates, 2 * h, h));
        auto o = ad::sigmoid(ad::block_cols(gates, 3 * h, h));
        cell = ad::cwise_mul(f, cell) + ad::cwise_mul(i, g);
        hidden = ad::cwise_mul(o, ad::tanh(cell));
      }
      return hidden;
    }
    case Aggr::att: {
      if (!p.att_q) throw std::invalid_argument("aggregate: attention query missing");
      std::vector<ad::Var<Scalar>> scores;
      for (const auto& m : messages) scores.push_back(ad::matmul(ad::mean_rows(m), *p.att_q));
      auto weights = ad::softmax_rows(ad::concat_cols(scores));
      auto acc = ad::scale_by(messages.front(), ad::block_cols(weights, 0, 1));
      for (std::size_t i = 1; i < messages.size(); ++i)
        acc = acc + ad::scale_by(messages[i], ad::block_cols(weights, static_cast<Index>(i), 1));
      return acc;
    }
  }
  throw std::logic_error("unhandled aggregator");
}

}  // namespace hgnas
