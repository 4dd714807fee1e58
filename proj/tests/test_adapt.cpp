#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "pointcache/adapt.hpp"
#include "pointcache/cache.hpp"
#include "support.hpp"

using namespace pointcache;
using namespace testing_support;

namespace {

CacheSnapshot snapshot_of(std::size_t classes, const std::vector<Vector>& keys,
                          const std::vector<ClassIndex>& labels) {
  CacheSnapshot s;
  s.classes = classes;
  s.global_keys = Matrix::from_rows(keys);
  s.global_labels = labels;
  s.local_keys = Matrix::from_rows(keys);
  s.local_labels = labels;
  for (std::size_t i = 0; i < labels.size(); ++i) s.part_owner.push_back(i);
  return s;
}

}  // namespace

TEST(GlobalAdapt, Examples) {
  const Vector q{1, 0, 0};
  const auto self = global_adapt(q, snapshot_of(5, {q}, {3}), 3.0);
  EXPECT_EQ(self, (Vector{0, 0, 0, 1, 0}));

  const auto orth = global_adapt(q, snapshot_of(5, {{0, 1, 0}}, {1}), 3.0);
  EXPECT_NEAR(orth[1], 0.049787068368, 1e-12);
  EXPECT_EQ(orth[0], 0.0);

  HierarchicalCache empty(5, 3, 3, 3);
  EXPECT_EQ(global_adapt(q, empty.snapshot(), 3.0), Vector(5, 0.0));
  EXPECT_THROW(global_adapt(Vector{1, 0}, snapshot_of(5, {q}, {3}), 3.0), ShapeError);
}

TEST(LocalAdapt, Examples) {
  const Vector q{0, 0, 1};
  const Matrix one = Matrix::from_rows({q});
  EXPECT_NEAR(local_adapt(one, snapshot_of(6, {q}, {5}), 3.0)[5], 1.0, 1e-15);

  Rng rng(2);
  const Vector p = random_unit(rng, 3);
  const CacheSnapshot snap = snapshot_of(4, {random_unit(rng, 3), random_unit(rng, 3)}, {0, 2});
  const Vector single = local_adapt(Matrix::from_rows({p}), snap, 3.0);
  const Vector doubled = local_adapt(Matrix::from_rows({p, p}), snap, 3.0);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(single[c], doubled[c], 1e-15);

  const Vector two = local_adapt(one, snapshot_of(2, {{1, 0, 0}, {0, 1, 0}}, {0, 0}), 3.0);
  EXPECT_NEAR(two[0], 0.0995741367357, 1e-12);

  EXPECT_THROW(local_adapt(Matrix::from_rows({{1, 0}}), snap, 3.0), ShapeError);
}

TEST(Fuse, Examples) {
  AdaptParams off;
  off.alpha_global = off.alpha_local = 0;
  const Vector zs{0.3, 0.7};
  const auto a = fuse(zs, Vector{5, 0}, Vector{9, 0}, off);
  EXPECT_EQ(a.logits, zs);
  EXPECT_EQ(a.label, 1u);

  AdaptParams g;
  g.alpha_global = 1;
  g.alpha_local = 0;
  const auto b = fuse(Vector{0.6, 0.4}, Vector{0, 1}, Vector{0, 0}, g);
  EXPECT_NEAR(b.logits[0], 0.6, 1e-15);
  EXPECT_NEAR(b.logits[1], 1.4, 1e-15);
  EXPECT_EQ(b.label, 1u);
  EXPECT_THROW(fuse(zs, Vector{1}, Vector{0, 0}, g), ShapeError);
}

TEST(AdaptParams, Validation) {
  AdaptParams p;
  EXPECT_NO_THROW(p.validate());
  p.beta_local = 0;
  EXPECT_THROW(p.validate(), ParameterError);
  p = {};
  p.alpha_global = -1;
  EXPECT_THROW(p.validate(), ParameterError);
}

TEST(AdaptProperties, BoundsPermutationAndOracle) {
  Rng rng(99);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t classes = 2 + rng.index(6);
    const std::size_t dim = 2 + rng.index(10);
    const std::size_t entries = rng.index(21);
    const std::size_t parts = 1 + rng.index(3);
    const double beta = rng.uniform(0.1, 9.0);
    std::vector<Vector> gkeys, lkeys;
    std::vector<ClassIndex> glabels, llabels;
    for (std::size_t e = 0; e < entries; ++e) {
      gkeys.push_back(random_unit(rng, dim));
      glabels.push_back(rng.index(classes));
      for (std::size_t p = 0; p < parts; ++p) {
        lkeys.push_back(random_unit(rng, dim));
        llabels.push_back(glabels.back());
      }
    }
    CacheSnapshot snap;
    snap.classes = classes;
    snap.global_keys = entries ? Matrix::from_rows(gkeys) : Matrix(0, dim);
    snap.global_labels = glabels;
    snap.local_keys = entries ? Matrix::from_rows(lkeys) : Matrix(0, dim);
    snap.local_labels = llabels;

    const Vector q = random_unit(rng, dim);
    std::vector<Vector> qparts;
    for (std::size_t p = 0; p < parts; ++p) qparts.push_back(random_unit(rng, dim));
    const Vector yg = global_adapt(q, snap, beta);
    const Vector yl = local_adapt(Matrix::from_rows(qparts), snap, beta);

    const Vector og = naive_global(q, gkeys, glabels, classes, beta);
    const Vector ol = naive_local(qparts, lkeys, llabels, classes, beta);
    for (std::size_t c = 0; c < classes; ++c) {
      EXPECT_LE(std::abs(yg[c] - og[c]), 1e-9 * std::max(1.0, std::abs(og[c])));
      EXPECT_LE(std::abs(yl[c] - ol[c]), 1e-9 * std::max(1.0, std::abs(ol[c])));
      const double count = static_cast<double>(std::count(glabels.begin(), glabels.end(), c));
      EXPECT_GE(yg[c], 0.0);
      EXPECT_LE(yg[c], count + 1e-12);
      EXPECT_LE(yl[c], static_cast<double>(parts) * count + 1e-12);
    }

    for (std::size_t i = 0; i < gkeys.size(); ++i) {
      const double a = affinity(cosine_sim(q, gkeys[i]), beta);
      EXPECT_GT(a, 0.0);
      EXPECT_LE(a, 1.0);
    }

    // Shuffled snapshot gives the same logits.
    std::vector<std::size_t> perm(entries);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = entries; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    CacheSnapshot shuffled;
    shuffled.classes = classes;
    shuffled.global_keys = Matrix(0, dim);
    shuffled.local_keys = Matrix(0, dim);
    for (std::size_t i : perm) {
      shuffled.global_keys.append_row(gkeys[i]);
      shuffled.global_labels.push_back(glabels[i]);
      for (std::size_t p = 0; p < parts; ++p) {
        shuffled.local_keys.append_row(lkeys[i * parts + p]);
        shuffled.local_labels.push_back(llabels[i * parts + p]);
      }
    }
    const Vector sg = global_adapt(q, shuffled, beta);
    const Vector sl = local_adapt(Matrix::from_rows(qparts), shuffled, beta);
    for (std::size_t c = 0; c < classes; ++c) {
      EXPECT_NEAR(sg[c], yg[c], 1e-9);
      EXPECT_NEAR(sl[c], yl[c], 1e-9);
    }

    // Raising alpha_g raises every class with global evidence.
    Vector zs = softmax(Vector(classes, 0.0), 1.0);
    AdaptParams lo, hi;
    hi.alpha_global = lo.alpha_global + 0.5;
    const auto flo = fuse(zs, yg, yl, lo), fhi = fuse(zs, yg, yl, hi);
    for (std::size_t c = 0; c < classes; ++c)
      if (yg[c] > 0) EXPECT_GT(fhi.logits[c], flo.logits[c]);
  }
}
