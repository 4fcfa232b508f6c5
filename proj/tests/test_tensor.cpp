#include <gtest/gtest.h>

#include "lrad/tensor.hpp"

using namespace lrad;

TEST(Tensor, ShapeAndIndexing) {
    Tensor<double> t({2, 3, 4});
    EXPECT_EQ(t.size(), 24u);
    EXPECT_EQ(t.rank(), 3u);
    t.at({1, 2, 3}) = 5.0;
    EXPECT_EQ(t[23], 5.0);
    t.at({0, 1, 0}) = 2.0;
    EXPECT_EQ(t[4], 2.0);
    EXPECT_THROW(t.at({2, 0, 0}), ShapeError);
    EXPECT_THROW(t.at({0, 0}), ShapeError);
    EXPECT_THROW(t.dim(3), ShapeError);
}

TEST(Tensor, RejectsZeroExtentsAndSizeMismatch) {
    EXPECT_THROW(Tensor<float>({3, 0}), ShapeError);
    EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST(Tensor, ReshapeKeepsData) {
    Tensor<int> t({2, 3}, std::vector<int>{0, 1, 2, 3, 4, 5});
    const auto r = t.reshaped({3, 2});
    EXPECT_EQ(r.values(), t.values());
    EXPECT_EQ(r.shape(), (Shape{3, 2}));
    EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Tensor, Transpose2d) {
    Tensor<double> t({2, 3}, {1, 2, 3, 4, 5, 6});
    const auto tt = transpose2d(t);
    EXPECT_EQ(tt.shape(), (Shape{3, 2}));
    EXPECT_EQ(tt.values(), (std::vector<double>{1, 4, 2, 5, 3, 6}));
    EXPECT_EQ(transpose2d(tt), t);
}

TEST(Tensor, ReductionsAndFiniteness) {
    Tensor<double> a({3}, {1, 2, 3}), b({3}, {4, 5, 6});
    EXPECT_EQ(dot(a, b), 32.0);
    EXPECT_EQ(sum(a), 6.0);
    add_inplace(a, b);
    EXPECT_EQ(a.values(), (std::vector<double>{5, 7, 9}));
    EXPECT_TRUE(a.all_finite());
    a[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(a.all_finite());
    EXPECT_THROW(add_inplace(a, Tensor<double>({2})), ShapeError);
}
