#include <gtest/gtest.h>

#include <algorithm>

#include "resmet/core.hpp"
#include "resmet/multiplicity.hpp"

using namespace resmet;

TEST(Adjust, BhHandExample) {
  auto adj = adjust_pvalues({0.01, 0.02, 0.03, 0.04},
                            AdjustmentMethod::benjamini_hochberg);
  for (double v : adj) EXPECT_NEAR(v, 0.04, 1e-12);
}

TEST(Adjust, HolmHandExample) {
  auto adj = adjust_pvalues({0.01, 0.04}, AdjustmentMethod::holm);
  EXPECT_NEAR(adj[0], 0.02, 1e-12);
  EXPECT_NEAR(adj[1], 0.04, 1e-12);
}

TEST(Adjust, ByHandExample) {
  // c(2) = 1.5: (0.01*2*1.5, 0.04*1*1.5) with step-up -> (0.03, 0.06)
  auto adj = adjust_pvalues({0.01, 0.04},
                            AdjustmentMethod::benjamini_yekutieli);
  EXPECT_NEAR(adj[0], 0.03, 1e-12);
  EXPECT_NEAR(adj[1], 0.06, 1e-12);
}

TEST(Adjust, NoneIsIdentityAndEmptyOk) {
  std::vector<double> p = {0.5, 0.1};
  EXPECT_EQ(adjust_pvalues(p, AdjustmentMethod::none), p);
  EXPECT_TRUE(adjust_pvalues({}, AdjustmentMethod::holm).empty());
}

TEST(Adjust, RejectsOutOfRange) {
  EXPECT_THROW(adjust_pvalues({0.5, 1.2}, AdjustmentMethod::holm), DataError);
  EXPECT_THROW(adjust_pvalues({-0.1}, AdjustmentMethod::benjamini_hochberg),
               DataError);
  EXPECT_THROW(adjust_pvalues({std::nan("")}, AdjustmentMethod::holm),
               DataError);
}

TEST(Adjust, PropertyTests) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t m = 1 + rng.below(12);
    std::vector<double> p(m);
    for (auto& v : p) v = rng.uniform();

    for (auto method : {AdjustmentMethod::holm,
                        AdjustmentMethod::benjamini_hochberg,
                        AdjustmentMethod::benjamini_yekutieli}) {
      auto adj = adjust_pvalues(p, method);
      ASSERT_EQ(adj.size(), m);
      // adjusted values dominate raw ones and stay in [0,1]
      for (std::size_t i = 0; i < m; ++i) {
        EXPECT_GE(adj[i], p[i] - 1e-15);
        EXPECT_LE(adj[i], 1.0);
      }
      // order preservation: smaller raw p never gets a larger adjustment
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
          if (p[i] < p[j]) EXPECT_LE(adj[i], adj[j] + 1e-15);
      // permutation equivariance under reversal
      std::vector<double> rev(p.rbegin(), p.rend());
      auto adj_rev = adjust_pvalues(rev, method);
      for (std::size_t i = 0; i < m; ++i)
        EXPECT_NEAR(adj_rev[m - 1 - i], adj[i], 1e-12);
    }
    // BY is uniformly more conservative than BH
    auto bh = adjust_pvalues(p, AdjustmentMethod::benjamini_hochberg);
    auto by = adjust_pvalues(p, AdjustmentMethod::benjamini_yekutieli);
    for (std::size_t i = 0; i < m; ++i) EXPECT_GE(by[i], bh[i] - 1e-15);
  }
}

TEST(Adjust, StringConversions) {
  EXPECT_EQ(adjustment_from_string("holm"), AdjustmentMethod::holm);
  EXPECT_EQ(adjustment_from_string("bh"), AdjustmentMethod::benjamini_hochberg);
  EXPECT_EQ(adjustment_from_string("benjamini-yekutieli"),
            AdjustmentMethod::benjamini_yekutieli);
  EXPECT_THROW(adjustment_from_string("fdr"), DataError);
  EXPECT_EQ(to_string(AdjustmentMethod::benjamini_hochberg), "bh");
}
