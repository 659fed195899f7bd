#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "rfm/analysis.hpp"
#include "rfm/filter_precond.hpp"

using namespace rfm;

namespace {

GlobalSystem oscillator_system(std::size_t s = 20, std::size_t k = 8) {
  const ProblemSpec p = oscillator_problem(60.0);
  const Decomposition dec(p.domain, s, 2.9);
  const FeatureBasis basis = init_basis(dec, k, 1, Activation::tanh, RandomSource(0));
  return assemble(p, dec, basis);
}

GlobalSystem laplace_system() {
  const ProblemSpec p = laplace_problem(2);
  const Decomposition dec(p.domain, 4, 2.9);
  const FeatureBasis basis = init_basis(dec, 16, 1, Activation::tanh, RandomSource(1));
  return assemble(p, dec, basis);
}

}  // namespace

TEST_CASE("filtered blocks factor the kept columns with orthonormal Q") {
  for (const GlobalSystem& sys : {oscillator_system(), laplace_system()}) {
    const FilteredSystem fs = filter(sys, 1e-8);
    REQUIRE(fs.blocks().size() == sys.subdomains());
    std::size_t total = 0;
    for (std::size_t j = 0; j < fs.blocks().size(); ++j) {
      const FilteredBlock& fb = fs.block(j);
      const DenseMatrix& mj = sys.matrix.block(j).values;
      CHECK(orthonormality_error(fb.q) <= 1e-12);
      DenseMatrix kept(mj.rows(), static_cast<Eigen::Index>(fb.rank()));
      for (std::size_t c = 0; c < fb.rank(); ++c) kept.col(static_cast<Eigen::Index>(c)) = mj.col(static_cast<Eigen::Index>(fb.kept[c]));
      CHECK(oracle::relative_difference(fb.q * fb.r, kept) <= 1e-12);
      CHECK(fb.kept.size() + fb.dropped.size() == sys.features);
      CHECK(fb.reduced_offset == total);
      total += fb.rank();
    }
    CHECK(fs.reduced_cols() == total);
    CHECK(fs.drop_fraction() == doctest::Approx(1.0 - double(total) / double(sys.cols())));
    CHECK(fs.kept_columns().size() == total);
  }
}

TEST_CASE("diagonal blocks of Q^T Q are identities and the norm is bounded by the overlap") {
  const GlobalSystem sys = oscillator_system();
  const FilteredSystem fs = filter(sys, 1e-8);
  const DenseMatrix q = precondition(fs).to_dense();
  const DenseMatrix g = q.transpose() * q;
  for (const auto& fb : fs.blocks()) {
    const auto o = static_cast<Eigen::Index>(fb.reduced_offset), r = static_cast<Eigen::Index>(fb.rank());
    CHECK((g.block(o, o, r, r) - DenseMatrix::Identity(r, r)).norm() <= 1e-12);
  }
  // each row meets at most three subdomains here, so ||Q||^2 <= 3
  std::vector<int> cover(sys.rows(), 0);
  for (const auto& b : sys.matrix.blocks())
    for (const std::size_t r : b.rows) ++cover[r];
  const int depth = *std::max_element(cover.begin(), cover.end());
  CHECK(depth <= 3);
  const double smax = singular_values(q).front();
  CHECK(smax * smax <= depth + 1e-10);
}

TEST_CASE("preconditioned and filtered operators agree after recovery") {
  const GlobalSystem sys = laplace_system();
  const FilteredSystem fs = filter(sys, 1e-6);
  const PreconditionedOperator q = precondition(fs);
  const BlockMatrix mhat = filtered_matrix(fs);
  RandomSource rng(2);
  for (int i = 0; i < 5; ++i) {
    Vector y(static_cast<Eigen::Index>(fs.reduced_cols()));
    for (Eigen::Index k = 0; k < y.size(); ++k) y(k) = rng.normal();
    const Vector a = recover_solution(fs, y);
    // M a = Q y
    const Vector qy = q.apply(y);
    CHECK((sys.matrix.apply(a) - qy).norm() <= 1e-9 * qy.norm());
    // dropped columns stay at zero
    std::vector<bool> kept(sys.cols(), false);
    for (const std::size_t c : fs.kept_columns()) kept[c] = true;
    for (std::size_t c = 0; c < sys.cols(); ++c)
      if (!kept[c]) CHECK(a(static_cast<Eigen::Index>(c)) == 0.0);
    // the reduced-column view of a reproduces M^ applied to it
    Vector reduced(static_cast<Eigen::Index>(fs.reduced_cols()));
    const auto cols = fs.kept_columns();
    for (std::size_t c = 0; c < cols.size(); ++c) reduced(static_cast<Eigen::Index>(c)) = a(static_cast<Eigen::Index>(cols[c]));
    CHECK((mhat.apply(reduced) - qy).norm() <= 1e-9 * qy.norm());
  }
  CHECK(oracle::error_code_of([&] { recover_solution(fs, Vector::Zero(3)); }) == ErrorCode::dimension_mismatch);
}

TEST_CASE("kept sets are nested as sigma grows") {
  const GlobalSystem sys = laplace_system();
  const std::vector<double> sigmas = {0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2};
  std::vector<FilteredSystem> runs;
  for (const double s : sigmas) runs.push_back(filter(sys, s));
  for (std::size_t i = 1; i < runs.size(); ++i) {
    CHECK(runs[i].reduced_cols() <= runs[i - 1].reduced_cols());
    for (std::size_t j = 0; j < sys.subdomains(); ++j) {
      const auto& loose = runs[i - 1].block(j).kept;
      const auto& tight = runs[i].block(j).kept;
      REQUIRE(tight.size() <= loose.size());
      // same pivot sequence, so the tighter set is a prefix
      CHECK(std::equal(tight.begin(), tight.end(), loose.begin()));
    }
  }
  CHECK(runs.front().drop_fraction() == 0.0);
  CHECK(runs.back().drop_fraction() > 0.0);
}

TEST_CASE("preconditioning lowers the condition number") {
  const GlobalSystem sys = oscillator_system();
  const FilteredSystem fs = filter(sys, 1e-8);
  const double km = condition_number(sys.matrix).value;
  const double kq = condition_number(precondition(fs).matrix()).value;
  MESSAGE("kappa(M) ", km, " kappa(Q) ", kq);
  CHECK(kq < km);
}

TEST_CASE("a block that keeps nothing is reported") {
  const GlobalSystem good = oscillator_system(3, 2);
  std::vector<MatrixBlock> blocks = good.matrix.blocks();
  blocks[1].values.setZero();
  GlobalSystem bad = good;
  bad.matrix = BlockMatrix(good.rows(), good.cols(), blocks);
  try {
    filter(bad, 1e-8);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_subdomain);
    CHECK(std::string(e.what()).find("subdomain 1") != std::string::npos);
  }
  CHECK(oracle::error_code_of([&] { filter(good, -1.0); }) == ErrorCode::invalid_input);
}

TEST_CASE("summary json lists per-block ranks") {
  const GlobalSystem sys = oscillator_system(3, 2);
  const FilteredSystem fs = filter(sys, 1e-8);
  const std::string js = fs.summary_json();
  CHECK(js.find("\"block_ranks\":[2,2,2]") != std::string::npos);
  CHECK(js.find("\"sigma\":1e-08") != std::string::npos);
}
