#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "sgltn/fuzzy.hpp"
#include "support/gradcheck.hpp"

using namespace sgltn;
using sgltn::testing::finite_diff_check;
using sgltn::testing::random_tensor;

namespace {

TruthTensor truths(Tape& tp, std::vector<double> vals) {
  int n = int(vals.size());
  return TruthTensor::constant(tp, Tensor::from({n}, std::move(vals)));
}

double scalar_truth(const TruthTensor& t, std::size_t i = 0) { return t.value().data[i]; }

}  // namespace

TEST_CASE("negation") {
  Tape tp;
  TruthTensor a = truths(tp, {0.0, 0.3, 1.0});
  TruthTensor n = not_std(a);
  CHECK(scalar_truth(n, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(scalar_truth(n, 1) == doctest::Approx(0.7));
  CHECK(scalar_truth(n, 2) == doctest::Approx(0.0).epsilon(1e-6));

  // involution within clamp eps
  TruthTensor nn = not_std(n);
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(scalar_truth(nn, std::size_t(i)) - scalar_truth(a, std::size_t(i))) < 1e-6);
}

TEST_CASE("product and / probabilistic or") {
  Tape tp;
  TruthTensor a = truths(tp, {0.5});
  TruthTensor b = truths(tp, {0.5});
  CHECK(scalar_truth(and_prod(a, b)) == doctest::Approx(0.25));

  TruthTensor z = truths(tp, {0.0});
  TruthTensor x = truths(tp, {0.37});
  CHECK(scalar_truth(or_probsum(x, z)) == doctest::Approx(0.37).epsilon(1e-6));
}

TEST_CASE("De Morgan holds numerically for prod/probsum") {
  Rng rng(17);
  Tape tp;
  TruthTensor a = TruthTensor::constant(tp, random_tensor({100}, rng, 0.0, 1.0));
  TruthTensor b = TruthTensor::constant(tp, random_tensor({100}, rng, 0.0, 1.0));
  TruthTensor lhs = not_std(or_probsum(a, b));
  TruthTensor rhs = and_prod(not_std(a), not_std(b));
  for (std::size_t i = 0; i < 100; ++i)
    CHECK(std::abs(scalar_truth(lhs, i) - scalar_truth(rhs, i)) < 1e-12);
}

TEST_CASE("lukasiewicz connectives") {
  Tape tp;
  TruthTensor a = truths(tp, {0.7});
  TruthTensor b = truths(tp, {0.6});
  CHECK(scalar_truth(lukasiewicz(a, b, LukKind::And)) == doctest::Approx(0.3));
  CHECK(scalar_truth(lukasiewicz(a, b, LukKind::Or)) == doctest::Approx(1.0));

  TruthTensor one = truths(tp, {1.0});
  TruthTensor x = truths(tp, {0.42});
  CHECK(scalar_truth(lukasiewicz(x, one, LukKind::And)) == doctest::Approx(0.42).epsilon(1e-6));
}

TEST_CASE("goguen implication values") {
  Tape tp;
  TruthTensor zero = truths(tp, {0.0});
  TruthTensor b = truths(tp, {0.25});
  CHECK(scalar_truth(implies_goguen(zero, b)) == doctest::Approx(1.0));

  TruthTensor a = truths(tp, {0.8});
  TruthTensor c = truths(tp, {0.4});
  CHECK(scalar_truth(implies_goguen(a, c)) == doctest::Approx(0.5));

  Rng rng(4);
  TruthTensor r = TruthTensor::constant(tp, random_tensor({50}, rng, 0.0, 1.0));
  TruthTensor refl = implies_goguen(r, r);
  for (std::size_t i = 0; i < 50; ++i) CHECK(scalar_truth(refl, i) == doctest::Approx(1.0));
}

TEST_CASE("forall_pme closed forms") {
  Tape tp;
  CHECK(scalar_truth(forall_pme(truths(tp, {1, 1, 1}), 2.0)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(scalar_truth(forall_pme(truths(tp, {1, 0}), 2.0)) ==
        doctest::Approx(1.0 - std::sqrt(0.5)).epsilon(1e-4));

  // p=1 degenerates to the arithmetic mean
  CHECK(scalar_truth(forall_pme(truths(tp, {0.2, 0.4, 0.9}), 1.0)) ==
        doctest::Approx(0.5).epsilon(1e-6));

  TruthTensor empty{&tp, tp.leaf(Tensor::from({0}, {}))};
  CHECK_THROWS_AS(forall_pme(empty, 2.0), Error);
}

TEST_CASE("sat_agg") {
  Tape tp;
  TruthTensor single = truths(tp, {0.77});
  CHECK(scalar_truth(sat_agg({single}, 2.0)) == doctest::Approx(0.77).epsilon(1e-6));

  TruthTensor one_a = truths(tp, {1.0});
  TruthTensor one_b = truths(tp, {1.0});
  CHECK(scalar_truth(sat_agg({one_a, one_b}, 2.0)) == doctest::Approx(1.0).epsilon(1e-6));

  TruthTensor f1 = truths(tp, {0.9});
  TruthTensor f2 = truths(tp, {0.5});
  CHECK(scalar_truth(sat_agg({f1, f2}, 2.0)) ==
        doctest::Approx(1.0 - std::sqrt(0.13)).epsilon(1e-4));

  CHECK_THROWS_AS(sat_agg({}, 2.0), Error);
}

TEST_CASE("range closure on random tensors") {
  Rng rng(31);
  Tape tp;
  for (int trial = 0; trial < 100; ++trial) {
    TruthTensor a = TruthTensor::constant(tp, random_tensor({100}, rng, -0.5, 1.5));
    TruthTensor b = TruthTensor::constant(tp, random_tensor({100}, rng, -0.5, 1.5));
    std::vector<TruthTensor> outs = {
        not_std(a),           and_prod(a, b),
        or_probsum(a, b),     lukasiewicz(a, b, LukKind::And),
        lukasiewicz(a, b, LukKind::Or),
        implies_goguen(a, b), forall_pme(a, 2.0),
        forall_pme(b, 7.5)};
    for (const TruthTensor& t : outs)
      for (double v : t.value().data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
  }
}

TEST_CASE("monotonicity under perturbation") {
  Rng rng(57);
  const double delta = 1e-3;
  for (int trial = 0; trial < 200; ++trial) {
    double a = 0.1 + 0.7 * rng.uniform();
    double b = 0.1 + 0.7 * rng.uniform();
    Tape tp;
    auto t = [&](double v) { return truths(tp, {v}); };

    CHECK(scalar_truth(and_prod(t(a + delta), t(b))) >= scalar_truth(and_prod(t(a), t(b))));
    CHECK(scalar_truth(or_probsum(t(a + delta), t(b))) >= scalar_truth(or_probsum(t(a), t(b))));
    CHECK(scalar_truth(implies_goguen(t(a + delta), t(b))) <=
          scalar_truth(implies_goguen(t(a), t(b))));
    CHECK(scalar_truth(implies_goguen(t(a), t(b + delta))) >=
          scalar_truth(implies_goguen(t(a), t(b))));

    Tensor vec = random_tensor({10}, rng, 0.1, 0.9);
    Tensor bumped = vec;
    bumped.data[std::size_t(rng.uniform_int(10))] += delta;
    CHECK(scalar_truth(forall_pme(TruthTensor::constant(tp, bumped), 3.0)) >=
          scalar_truth(forall_pme(TruthTensor::constant(tp, vec), 3.0)));
  }
}

TEST_CASE("goguen gradient pulls consequent up when antecedent exceeds it") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    double a = 0.3 + 0.6 * rng.uniform();
    double b = a - 1e-3 - (a - 0.05) * rng.uniform();  // b < a - 1e-3
    b = std::max(b, 0.01);
    Tape tp;
    Tensor bv = Tensor::from({1}, {b});
    bv.requires_grad = true;
    Tape::Id bid = tp.leaf(bv);
    TruthTensor at = truths(tp, {a});
    TruthTensor bt = TruthTensor::wrap(tp, bid);
    TruthTensor impl = implies_goguen(at, bt);
    tp.backward(impl.id);
    CHECK(tp.grad(bid).item() > 0.0);
  }
}

TEST_CASE("forall_pme approaches min for large p") {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor vec = random_tensor({20}, rng, 0.0, 1.0);
    double mn = *std::min_element(vec.data.begin(), vec.data.end());
    Tape tp;
    double got = scalar_truth(forall_pme(TruthTensor::constant(tp, vec), 64.0));
    CHECK(std::abs(got - mn) < 0.05);
  }
}

TEST_CASE("gradient check: fuzzy connectives and quantifiers") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    // stay away from goguen branch points: |a - b| > 1e-3 enforced per element
    Tensor a = random_tensor({8}, rng, 0.15, 0.85);
    Tensor b = random_tensor({8}, rng, 0.15, 0.85);
    for (std::size_t i = 0; i < 8; ++i)
      if (std::abs(a.data[i] - b.data[i]) < 5e-3) b.data[i] = std::min(0.95, b.data[i] + 1e-2);

    auto res = finite_diff_check({a, b}, [](Tape& tp, const std::vector<Tape::Id>& ids) {
      TruthTensor ta{&tp, ids[0]};  // already interior; no clamp kink
      TruthTensor tb{&tp, ids[1]};
      TruthTensor f1 = forall_pme(implies_goguen(ta, tb), 4.0);
      TruthTensor f2 = forall_pme(and_prod(ta, tb), 2.0);
      TruthTensor f3 = forall_pme(or_probsum(not_std(ta), tb), 2.0);
      TruthTensor s = sat_agg({f1, f2, f3}, 2.0);
      return s.id;
    });
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("gradient check: forall_pme with extreme p stays stable") {
  Rng rng(29);
  Tensor a = random_tensor({12}, rng, 0.1, 0.9);
  auto res = finite_diff_check({a}, [](Tape& tp, const std::vector<Tape::Id>& ids) {
    return forall_pme(TruthTensor{&tp, ids[0]}, 32.0).id;
  });
  CHECK(res.max_rel_err < 1e-3);  // looser: p=32 curvature amplifies FD noise
  CHECK(res.points_checked == 12);
}
