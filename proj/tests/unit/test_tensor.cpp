#include <cmath>
#include <limits>

#include "doctest.h"
#include "ntlc/errors.hpp"
#include "ntlc/tensor.hpp"

using ntlc::Tensor;

TEST_CASE("construction zero-fills and tracks shape") {
  Tensor t({2, 3});
  CHECK(t.rank() == 2);
  CHECK(t.dim(0) == 2);
  CHECK(t.dim(1) == 3);
  CHECK(t.numel() == 6);
  for (double v : t.flat()) CHECK(v == 0.0);
  CHECK(t.shape_string() == "{2,3}");
  CHECK(Tensor({4}).shape_string() == "{4}");
  CHECK(Tensor({2, 3, 4}).numel() == 24);
}

TEST_CASE("rank limits") {
  CHECK_THROWS_AS(Tensor(std::vector<std::size_t>{}), ntlc::ShapeError);
  CHECK_THROWS_AS(Tensor({1, 1, 1, 1}), ntlc::ShapeError);
}

TEST_CASE("row-major indexing") {
  Tensor t({2, 3});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(i);
  CHECK(t.at2(0, 0) == 0.0);
  CHECK(t.at2(0, 2) == 2.0);
  CHECK(t.at2(1, 0) == 3.0);
  CHECK(t.at2(1, 2) == 5.0);

  Tensor u({2, 3, 2});
  for (std::size_t i = 0; i < u.numel(); ++i) u[i] = static_cast<double>(i);
  CHECK(u.at3(0, 0, 0) == 0.0);
  CHECK(u.at3(0, 0, 1) == 1.0);
  CHECK(u.at3(0, 1, 0) == 2.0);
  CHECK(u.at3(1, 0, 0) == 6.0);
  CHECK(u.at3(1, 2, 1) == 11.0);
}

TEST_CASE("reshape preserves data, rejects numel changes") {
  Tensor t({2, 6});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(i);
  t.reshape({3, 4});
  CHECK(t.rank() == 2);
  CHECK(t.at2(2, 3) == 11.0);
  t.reshape({12});
  CHECK(t[7] == 7.0);
  t.reshape({2, 3, 2});
  CHECK(t.at3(1, 2, 1) == 11.0);
  CHECK_THROWS_AS(t.reshape({5}), ntlc::ShapeError);
}

TEST_CASE("same_shape and fill") {
  Tensor a({2, 2});
  Tensor b({2, 2});
  Tensor c({4});
  CHECK(a.same_shape(b));
  CHECK_FALSE(a.same_shape(c));
  a.fill(2.5);
  for (double v : a.flat()) CHECK(v == 2.5);
}

TEST_CASE("all_finite") {
  Tensor t({3});
  CHECK(t.all_finite());
  t[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(t.all_finite());
  t[1] = 0.0;
  t[2] = std::nan("");
  CHECK_FALSE(t.all_finite());
}
