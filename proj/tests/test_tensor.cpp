#include <vector>

#include "doctest.h"
#include "ib/ops.hpp"
#include "ib/tape.hpp"
#include "ib/tensor.hpp"

using ib::DType;
using ib::Tensor;

TEST_CASE("construction, shape and element access") {
  Tensor t = Tensor::from({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(t.rank() == 2);
  CHECK(t.size() == 6);
  CHECK(t.dim(0) == 2);
  CHECK(t.dim(1) == 3);
  CHECK(t.at(0) == 1.0);
  CHECK(t.at(5) == 6.0);
  CHECK(t.dtype() == DType::f64);
  CHECK_THROWS_AS(t.at(6), ib::ContractError);
  CHECK_THROWS_AS((void)t.f32(), ib::ContractError);

  Tensor s = Tensor::scalar(3.5);
  CHECK(s.rank() == 0);
  CHECK(s.size() == 1);
  CHECK(s.at(0) == 3.5);
}

TEST_CASE("copies share storage until mutated") {
  Tensor a = Tensor::from({3}, std::vector<double>{1, 2, 3});
  Tensor b = a;
  b.mut_f64()[0] = 99.0;
  CHECK(a.at(0) == 1.0);
  CHECK(b.at(0) == 99.0);
}

TEST_CASE("reshape preserves data and checks element count") {
  Tensor a = Tensor::from({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor b = a.reshaped({3, 2});
  CHECK(b.at(4) == 5.0);
  CHECK_THROWS_AS(a.reshaped({4, 2}), ib::ContractError);
}

TEST_CASE("astype converts values both directions") {
  Tensor a = Tensor::from({2}, std::vector<double>{1.5, -2.25});
  Tensor f = a.astype(DType::f32);
  CHECK(f.dtype() == DType::f32);
  CHECK(f.f32()[1] == -2.25f);
  Tensor d = f.astype(DType::f64);
  CHECK(d.at(0) == 1.5);
}

TEST_CASE("shape mismatch errors carry both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  CHECK_THROWS_WITH_AS(ib::matmul(a, b),
                       doctest::Contains("matmul"), ib::ContractError);
  CHECK_THROWS_AS(ib::add(a, b), ib::ContractError);
}

TEST_CASE("dtype mixing is rejected") {
  Tensor a = Tensor::zeros({2, 2});
  Tensor b = Tensor::zeros({2, 2}, DType::f32);
  CHECK_THROWS_AS(ib::add(a, b), ib::ContractError);
  CHECK_THROWS_AS(ib::matmul(a, b), ib::ContractError);
}

TEST_CASE("f32 ops compute and keep their dtype") {
  Tensor a = Tensor::from({2, 2}, std::vector<float>{1, 2, 3, 4});
  Tensor b = Tensor::from({2, 2}, std::vector<float>{5, 6, 7, 8});
  Tensor c = ib::matmul(a, b);
  CHECK(c.dtype() == DType::f32);
  CHECK(c.at(0) == doctest::Approx(19.0));
  Tensor sm = ib::softmax(a);
  CHECK(sm.dtype() == DType::f32);
  double row0 = sm.at(0) + sm.at(1);
  CHECK(row0 == doctest::Approx(1.0).epsilon(1e-6));

  // gradients flow in f32 too
  ib::Tape tape;
  Tensor xa = tape.var(a);
  Tensor loss = ib::sum(ib::square(xa));
  tape.backward(loss);
  Tensor g = tape.grad(xa);
  CHECK(g.dtype() == DType::f32);
  CHECK(g.at(3) == doctest::Approx(8.0));
}

TEST_CASE("attached tensors cannot be mutated") {
  ib::Tape tape;
  Tensor a = tape.var(Tensor::zeros({2}));
  CHECK_THROWS_AS(a.mut_f64(), ib::ContractError);
}
