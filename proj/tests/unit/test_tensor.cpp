#include <doctest.h>

#include <cmath>

#include "cfaudit/error.hpp"
#include "cfaudit/nn.hpp"
#include "cfaudit/optim.hpp"
#include "cfaudit/random.hpp"
#include "cfaudit/tensor.hpp"
#include "gradcheck.hpp"

using namespace cfaudit;
using cfaudit::testing::check_gradients;

namespace {

Matrix uniform_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

// Contracts an arbitrary-shape tensor to a scalar with fixed random weights so
// every output entry contributes a distinct gradient.
Tensor contract(Tape& tape, Tensor x, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(x * tape.constant(uniform_matrix(rng, x.rows(), x.cols())));
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("sigmoid value and slope at zero") {
    Parameter x("x", Matrix::Zero(1, 1));
    Tape tape;
    const Tensor y = sigmoid(tape.leaf(x));
    CHECK(y.item() == doctest::Approx(0.5));
    tape.backward(y);
    CHECK(x.grad(0, 0) == doctest::Approx(0.25));
  }

  TEST_CASE("matmul of a row by a column") {
    Tape tape;
    Matrix a(1, 2), b(2, 1);
    a << 1, 2;
    b << 3, 4;
    CHECK(matmul(tape.constant(a), tape.constant(b)).item() == 11.0);
  }

  TEST_CASE("gradient of a sum of squares") {
    Parameter w("w", Matrix(1, 3));
    w.value << 1, -2, 3;
    Tape tape;
    tape.backward(sum(square(tape.leaf(w))));
    CHECK(w.grad(0, 0) == 2.0);
    CHECK(w.grad(0, 1) == -4.0);
    CHECK(w.grad(0, 2) == 6.0);
  }

  TEST_CASE("disconnected leaf receives a zero gradient") {
    Parameter used("used", Matrix::Ones(2, 2));
    Parameter unused("unused", Matrix::Ones(3, 1));
    unused.grad.setConstant(7.0);
    Tape tape;
    tape.leaf(unused);
    tape.backward(sum(tape.leaf(used)));
    CHECK(unused.grad.isZero());
    CHECK(used.grad.isOnes());
  }

  TEST_CASE("backward rejects a non-scalar loss") {
    Parameter w("w", Matrix::Ones(2, 2));
    Tape tape;
    const Tensor x = tape.leaf(w);
    try {
      tape.backward(x);
      FAIL("expected NonScalarLoss");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NonScalarLoss);
    }
  }

  TEST_CASE("shape errors") {
    Tape tape;
    const Tensor a = tape.constant(Matrix::Ones(2, 3));
    const Tensor b = tape.constant(Matrix::Ones(2, 2));
    CHECK_THROWS_AS(matmul(a, b), Error);
    CHECK_THROWS_AS(a + tape.constant(Matrix::Ones(3, 3)), Error);
    CHECK_THROWS_AS(concat(a, tape.constant(Matrix::Ones(3, 1))), Error);
    CHECK_THROWS_AS(tape.slice(a, 2, 2), Error);
    CHECK_THROWS_AS(tape.slice(a, 0, 4), Error);
  }

  TEST_CASE("non-finite detection is configurable") {
    {
      Tape tape;
      try {
        log(tape.constant(-1.0));
        FAIL("expected NonFinite");
      } catch (const Error& e) {
        CHECK(e.code() == Errc::NonFinite);
      }
    }
    Tape lax(false);
    CHECK(std::isnan(log(lax.constant(-1.0)).item()));
  }

  TEST_CASE("broadcasting over rows and columns") {
    Tape tape;
    Matrix m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    Matrix row(1, 3);
    row << 10, 20, 30;
    Matrix col(2, 1);
    col << 100, 200;
    const Matrix r = (tape.constant(m) + tape.constant(row)).value();
    CHECK(r(1, 2) == 36.0);
    const Matrix c = (tape.constant(m) * tape.constant(col)).value();
    CHECK(c(1, 0) == 800.0);
    CHECK((tape.constant(m) - 1.0).value()(0, 0) == 0.0);
  }

  TEST_CASE("every op matches central finite differences") {
    Rng rng(2024);
    Parameter a("a", uniform_matrix(rng, 3, 4));
    Parameter b("b", uniform_matrix(rng, 3, 4));
    Parameter pos("pos", uniform_matrix(rng, 3, 4, 0.5, 2.0));
    Parameter row("row", uniform_matrix(rng, 1, 4));
    Parameter col("col", uniform_matrix(rng, 3, 1, 0.5, 2.0));
    Parameter w("w", uniform_matrix(rng, 4, 2));

    SUBCASE("add") { check_gradients({&a, &b}, [&](Tape& t) { return contract(t, t.leaf(a) + t.leaf(b)); }); }
    SUBCASE("add broadcast row") {
      check_gradients({&a, &row}, [&](Tape& t) { return contract(t, t.leaf(a) + t.leaf(row)); });
    }
    SUBCASE("sub") { check_gradients({&a, &b}, [&](Tape& t) { return contract(t, t.leaf(a) - t.leaf(b)); }); }
    SUBCASE("sub broadcast column") {
      check_gradients({&a, &col}, [&](Tape& t) { return contract(t, t.leaf(col) - t.leaf(a)); });
    }
    SUBCASE("mul") { check_gradients({&a, &b}, [&](Tape& t) { return contract(t, t.leaf(a) * t.leaf(b)); }); }
    SUBCASE("mul broadcast") {
      check_gradients({&a, &col}, [&](Tape& t) { return contract(t, t.leaf(a) * t.leaf(col)); });
    }
    SUBCASE("div") { check_gradients({&a, &pos}, [&](Tape& t) { return contract(t, t.leaf(a) / t.leaf(pos)); }); }
    SUBCASE("div broadcast") {
      check_gradients({&a, &col}, [&](Tape& t) { return contract(t, t.leaf(a) / t.leaf(col)); });
    }
    SUBCASE("neg") { check_gradients({&a}, [&](Tape& t) { return contract(t, -t.leaf(a)); }); }
    SUBCASE("scale") { check_gradients({&a}, [&](Tape& t) { return contract(t, 2.5 * t.leaf(a)); }); }
    SUBCASE("add scalar") { check_gradients({&a}, [&](Tape& t) { return contract(t, t.leaf(a) + 1.5); }); }
    SUBCASE("matmul") {
      check_gradients({&a, &w}, [&](Tape& t) { return contract(t, matmul(t.leaf(a), t.leaf(w))); });
    }
    SUBCASE("sigmoid") { check_gradients({&a}, [&](Tape& t) { return contract(t, sigmoid(t.leaf(a))); }); }
    SUBCASE("tanh") { check_gradients({&a}, [&](Tape& t) { return contract(t, tanh(t.leaf(a))); }); }
    SUBCASE("log") { check_gradients({&pos}, [&](Tape& t) { return contract(t, log(t.leaf(pos))); }); }
    SUBCASE("exp") { check_gradients({&a}, [&](Tape& t) { return contract(t, exp(t.leaf(a))); }); }
    SUBCASE("softplus") { check_gradients({&a}, [&](Tape& t) { return contract(t, softplus(t.leaf(a))); }); }
    SUBCASE("square") { check_gradients({&a}, [&](Tape& t) { return contract(t, square(t.leaf(a))); }); }
    SUBCASE("sum") { check_gradients({&a}, [&](Tape& t) { return square(sum(t.leaf(a))); }); }
    SUBCASE("mean") { check_gradients({&a}, [&](Tape& t) { return square(mean(t.leaf(a))); }); }
    SUBCASE("row sum") { check_gradients({&a}, [&](Tape& t) { return contract(t, square(row_sum(t.leaf(a)))); }); }
    SUBCASE("concat") {
      check_gradients({&a, &col}, [&](Tape& t) { return contract(t, square(concat(t.leaf(a), t.leaf(col)))); });
    }
    SUBCASE("slice") {
      check_gradients({&a}, [&](Tape& t) { return contract(t, square(t.slice(t.leaf(a), 1, 3))); });
    }
    SUBCASE("reused node") {
      check_gradients({&a}, [&](Tape& t) {
        const Tensor x = t.leaf(a);
        return contract(t, x * tanh(x) + x);
      });
    }
  }

  TEST_CASE("three-layer tanh network matches finite differences") {
    Rng rng(7);
    Mlp net("net", {3, 8, 8, 2}, rng);
    const Matrix x = uniform_matrix(rng, 5, 3);
    check_gradients(net.parameters(), [&](Tape& t) { return contract(t, net.forward(t, t.constant(x))); });
  }

  TEST_CASE("mlp evaluation agrees with the tape and the jacobian with differences") {
    Rng rng(8);
    Mlp net("net", {3, 16, 16, 2}, rng);
    const Matrix x = uniform_matrix(rng, 4, 3);
    Tape tape;
    const Matrix taped = net.forward(tape, tape.constant(x)).value();
    CHECK((net.evaluate(x) - taped).cwiseAbs().maxCoeff() < 1e-14);

    const RowVector x0 = x.row(0);
    const Matrix jac = net.jacobian(x0);
    REQUIRE(jac.rows() == 2);
    REQUIRE(jac.cols() == 3);
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < 3; ++j) {
      Matrix up = x0, down = x0;
      up(0, j) += h;
      down(0, j) -= h;
      const RowVector numeric = (net.evaluate(up) - net.evaluate(down)).row(0) / (2 * h);
      for (Eigen::Index i = 0; i < 2; ++i) CHECK(jac(i, j) == doctest::Approx(numeric(i)).epsilon(1e-6));
    }
  }

  TEST_CASE("exponential tanh agrees with std::tanh including saturation") {
    Matrix x(1, 7);
    x << -800, -20, -1e-8, 0, 3e-9, 0.7, 800;
    const Matrix y = tanh_of(x);
    for (Eigen::Index i = 0; i < x.cols(); ++i) CHECK(std::abs(y(0, i) - std::tanh(x(0, i))) < 1e-15);
  }

  TEST_CASE("tape replay is deterministic over 100 steps") {
    auto run = [] {
      Rng rng(11);
      Mlp net("net", {2, 8, 1}, rng);
      Adam opt(net.parameters());
      const Matrix x = uniform_matrix(rng, 16, 2);
      std::vector<double> losses;
      for (int s = 0; s < 100; ++s) {
        Tape tape;
        const Tensor loss = mean(square(net.forward(tape, tape.constant(x)) - 1.0));
        tape.backward(loss);
        opt.step();
        losses.push_back(loss.item());
      }
      return losses;
    };
    CHECK(run() == run());
  }

  TEST_CASE("grad of a constant is rejected") {
    Parameter w("w", Matrix::Ones(1, 1));
    Tape tape;
    const Tensor c = tape.constant(2.0);
    tape.backward(c * tape.leaf(w));
    CHECK(w.grad(0, 0) == 2.0);
    CHECK_THROWS_AS(tape.grad(c), Error);
  }
}
