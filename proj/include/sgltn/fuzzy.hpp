#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sgltn/tape.hpp"

namespace sgltn {

// Aggregator exponents for the p-mean-error universal quantifier: one value
// for the data-driven (equivalence) axioms, one for the ontology-driven
// (inclusion) axioms, one for the top-level satisfaction aggregation.
struct AggregatorConfig {
  double p_forall_equiv = 2.0;
  double p_forall_incl = 4.0;
  double p_satagg = 2.0;

  void validate() const {
    check(p_forall_equiv >= 1.0 && p_forall_incl >= 1.0 && p_satagg >= 1.0,
          "aggregator: p values must be >= 1");
  }
};

// Handle to a tape node whose values are truth degrees. Construction clamps
// into [eps, 1-eps]; connectives keep outputs in [0,1] by algebra and are
// not re-clamped, so gradients pass through untouched.
struct TruthTensor {
  static constexpr double kEps = 1e-7;

  Tape* tape = nullptr;
  Tape::Id id = -1;

  static TruthTensor wrap(Tape& tp, Tape::Id raw) {
    return TruthTensor{&tp, clamp(tp, raw, kEps, 1.0 - kEps)};
  }

  static TruthTensor constant(Tape& tp, const Tensor& t) { return wrap(tp, tp.leaf(t)); }

  const Tensor& value() const { return tape->value(id); }
  double item() const { return value().item(); }
};

namespace detail {
inline void same_tape(const TruthTensor& a, const TruthTensor& b, const char* op) {
  check(a.tape && a.tape == b.tape, std::string(op) + ": operands on different tapes");
}
}  // namespace detail

// 1 - a
inline TruthTensor not_std(TruthTensor a) {
  Tape& tp = *a.tape;
  return TruthTensor{&tp, sub(tp, constant(tp, 1.0), a.id)};
}

// product t-norm: a * b
inline TruthTensor and_prod(TruthTensor a, TruthTensor b) {
  detail::same_tape(a, b, "and_prod");
  return TruthTensor{a.tape, mul(*a.tape, a.id, b.id)};
}

// probabilistic sum: a + b - a*b
inline TruthTensor or_probsum(TruthTensor a, TruthTensor b) {
  detail::same_tape(a, b, "or_probsum");
  Tape& tp = *a.tape;
  return TruthTensor{&tp, sub(tp, add(tp, a.id, b.id), mul(tp, a.id, b.id))};
}

enum class LukKind { And, Or };

// Lukasiewicz connectives: and -> max(0, a+b-1), or -> min(1, a+b).
inline TruthTensor lukasiewicz(TruthTensor a, TruthTensor b, LukKind kind) {
  detail::same_tape(a, b, "lukasiewicz");
  Tape& tp = *a.tape;
  Tape::Id s = add(tp, a.id, b.id);
  if (kind == LukKind::And)
    return TruthTensor{&tp, max_const(tp, sub(tp, s, constant(tp, 1.0)), 0.0)};
  // min(1, s) = 1 - max(0, 1 - s)
  Tape::Id deficit = max_const(tp, sub(tp, constant(tp, 1.0), s), 0.0);
  return TruthTensor{&tp, sub(tp, constant(tp, 1.0), deficit)};
}

// Goguen implication: 1 where a <= b, else b/a. The kink at a == b resolves
// to the constant-1 branch (zero gradient); the quotient branch applies only
// for a > b.
inline TruthTensor implies_goguen(TruthTensor a, TruthTensor b) {
  detail::same_tape(a, b, "implies_goguen");
  Tape& tp = *a.tape;
  Tape::Id out = tp.record(
      "goguen", {a.id, b.id},
      [](const std::vector<const Tensor*>& in) {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        check(a.same_shape(b), "implies_goguen: shape mismatch");
        Tensor out = Tensor::zeros(a.shape);
        for (std::size_t i = 0; i < out.numel(); ++i) {
          double av = a.data[i], bv = b.data[i];
          out.data[i] = (av <= bv) ? 1.0 : bv / std::max(av, TruthTensor::kEps);
        }
        return out;
      },
      [](const Tape::BackwardCtx& c) {
        for (std::size_t i = 0; i < c.out.numel(); ++i) {
          double av = c.in[0]->data[i], bv = c.in[1]->data[i];
          if (av <= bv) continue;
          double denom = std::max(av, TruthTensor::kEps);
          if (c.gin[0]) (*c.gin[0])[i] += c.gout[i] * (-bv / (denom * denom));
          if (c.gin[1]) (*c.gin[1])[i] += c.gout[i] / denom;
        }
      });
  return TruthTensor{&tp, out};
}

// Universal quantifier as the p-mean error: 1 - (mean((1-a_i)^p))^(1/p).
// Computed with the max error factored out so large p neither under- nor
// overflows. Fused into one node; the analytic gradient is
//   d/da_i = M^(1/p - 1) * r_i^(p-1) / n  with r_i = e_i / max(e), M = mean(r^p).
inline TruthTensor forall_pme(TruthTensor a, double p) {
  check(p >= 1.0, "forall_pme: p must be >= 1");
  Tape& tp = *a.tape;
  check(tp.value(a.id).numel() > 0, "forall_pme: empty input");
  Tape::Id out = tp.record(
      "forall_pme", {a.id},
      [p](const std::vector<const Tensor*>& in) {
        const Tensor& a = *in[0];
        std::size_t n = a.numel();
        double emax = 0.0;
        for (std::size_t i = 0; i < n; ++i) emax = std::max(emax, 1.0 - a.data[i]);
        if (emax <= 0.0) return Tensor::scalar(1.0);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          acc += std::pow(std::max(0.0, 1.0 - a.data[i]) / emax, p);
        double root = emax * std::pow(acc / double(n), 1.0 / p);
        return Tensor::scalar(1.0 - root);
      },
      [p](const Tape::BackwardCtx& c) {
        if (!c.gin[0]) return;
        const Tensor& a = *c.in[0];
        std::size_t n = a.numel();
        double emax = 0.0;
        for (std::size_t i = 0; i < n; ++i) emax = std::max(emax, 1.0 - a.data[i]);
        if (emax <= 0.0) return;  // flat corner: all truths exactly 1
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          acc += std::pow(std::max(0.0, 1.0 - a.data[i]) / emax, p);
        double m = acc / double(n);
        double mterm = std::pow(m, 1.0 / p - 1.0);
        for (std::size_t i = 0; i < n; ++i) {
          double r = std::max(0.0, 1.0 - a.data[i]) / emax;
          (*c.gin[0])[i] += c.gout[0] * mterm * std::pow(r, p - 1.0) / double(n);
        }
      });
  return TruthTensor{&tp, out};
}

// Aggregates per-formula truths into one satisfaction level.
inline TruthTensor sat_agg(const std::vector<TruthTensor>& formulas, double p) {
  check(!formulas.empty(), "sat_agg: no formulas");
  Tape& tp = *formulas[0].tape;
  std::vector<Tape::Id> ids;
  ids.reserve(formulas.size());
  for (const TruthTensor& f : formulas) {
    check(f.tape == &tp, "sat_agg: formulas on different tapes");
    ids.push_back(f.id);
  }
  return forall_pme(TruthTensor{&tp, stack_scalars(tp, ids)}, p);
}

}  // namespace sgltn
