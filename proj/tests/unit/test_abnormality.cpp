#include <doctest.h>

#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "pairdbn/abnormality.hpp"
#include "pairdbn/error.hpp"

using namespace pairdbn;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }
Matrix m1(double x) { return Matrix::Constant(1, 1, x); }

double normal_pdf(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * M_PI * var);
}

// Trapezoid integral of sqrt(p q) on a wide grid.
double grid_coefficient(double mu1, double var1, double mu2, double var2) {
  const double lo = std::min(mu1, mu2) - 12.0 * std::sqrt(std::max(var1, var2));
  const double hi = std::max(mu1, mu2) + 12.0 * std::sqrt(std::max(var1, var2));
  const int n = 200000;
  const double h = (hi - lo) / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double f = std::sqrt(normal_pdf(x, mu1, var1) * normal_pdf(x, mu2, var2));
    sum += (i == 0 || i == n) ? 0.5 * f : f;
  }
  return sum * h;
}

AbnormalityReport report_from(std::string name, const std::vector<double>& thetas, Timestamp start = 0,
                              double threshold = 0.4) {
  AbnormalityReport r;
  r.model_name = std::move(name);
  r.threshold = threshold;
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    AbnormalitySample s;
    s.timestamp_ns = start + static_cast<Timestamp>(k) * 100'000'000;
    s.theta = thetas[k];
    s.lambda = 1.0 - thetas[k] * thetas[k];
    s.above_threshold = s.theta > threshold;
    r.samples.push_back(s);
  }
  r.intervals = flag_intervals(r.samples);
  return r;
}

EventWindow window(std::string vehicle, double start_s, double end_s) {
  return {std::move(vehicle), static_cast<Timestamp>(start_s * 1e9), static_cast<Timestamp>(end_s * 1e9),
          "emergency_stop"};
}

}  // namespace

TEST_CASE("Bhattacharyya coefficient against numerical integration") {
  const std::vector<std::array<double, 4>> cases{
      {0.0, 1.0, 1.0, 1.0}, {0.0, 1.0, 0.0, 4.0}, {0.3, 0.02, 0.5, 0.05}, {-2.0, 0.5, 1.0, 3.0}};
  for (const auto& c : cases) {
    CHECK(bhattacharyya_gaussian(v1(c[0]), m1(c[1]), v1(c[2]), m1(c[3])) ==
          doctest::Approx(grid_coefficient(c[0], c[1], c[2], c[3])).epsilon(1e-7));
  }

  // Two dimensions with correlation: an independent product-of-marginals check
  // after rotating both Gaussians into the shared eigenbasis.
  Matrix cov(2, 2);
  cov << 2.0, 0.6, 0.6, 1.0;
  Vector a(2), b(2);
  a << 0.0, 0.0;
  b << 1.0, -0.5;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Vector d = eig.eigenvectors().transpose() * (b - a);
  double product = 1.0;
  for (int i = 0; i < 2; ++i) product *= grid_coefficient(0.0, eig.eigenvalues()[i], d[i], eig.eigenvalues()[i]);
  CHECK(bhattacharyya_gaussian(a, cov, b, cov) == doctest::Approx(product).epsilon(1e-7));
}

TEST_CASE("reference values") {
  const double lambda = bhattacharyya_gaussian(v1(0.0), m1(1.0), v1(1.0), m1(1.0));
  CHECK(lambda == doctest::Approx(std::exp(-0.125)).epsilon(1e-12));
  CHECK(hellinger(lambda) == doctest::Approx(0.3428).epsilon(1e-4));
  CHECK(bhattacharyya_gaussian(v1(0.0), m1(1.0), v1(10.0), m1(1.0)) < 1e-5);
  CHECK(bhattacharyya_gaussian(v1(0.4), m1(0.3), v1(0.4), m1(0.3)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coefficient properties") {
  Rng rng(40);
  for (int k = 0; k < 200; ++k) {
    Vector a(2), b(2);
    a << rng.normal(), rng.normal();
    b << rng.normal(), rng.normal();
    Matrix la(2, 2), lb(2, 2);
    la << rng.uniform() + 0.1, 0.0, rng.normal(), rng.uniform() + 0.1;
    lb << rng.uniform() + 0.1, 0.0, rng.normal(), rng.uniform() + 0.1;
    const Matrix ca = la * la.transpose();
    const Matrix cb = lb * lb.transpose();
    const double lambda = bhattacharyya_gaussian(a, ca, b, cb);
    CHECK(lambda >= 0.0);
    CHECK(lambda <= 1.0);
    CHECK(lambda == doctest::Approx(bhattacharyya_gaussian(b, cb, a, ca)).epsilon(1e-12));
    const double s = 0.1 + 5.0 * rng.uniform();
    CHECK(lambda == doctest::Approx(bhattacharyya_gaussian(s * a, s * s * ca, s * b, s * s * cb)).epsilon(1e-9));
  }

  double previous = 2.0;
  for (int k = 0; k <= 50; ++k) {
    const double lambda = bhattacharyya_gaussian(v1(0.0), m1(0.5), v1(0.1 * k), m1(0.5));
    CHECK(lambda < previous);
    previous = lambda;
  }
}

TEST_CASE("singular covariances are regularized, indefinite ones rejected") {
  Matrix singular = Matrix::Zero(2, 2);
  singular(0, 0) = 1.0;
  Vector zero = Vector::Zero(2);
  const double lambda = bhattacharyya_gaussian(zero, singular, zero, Matrix::Identity(2, 2));
  CHECK(std::isfinite(lambda));
  Matrix indefinite = Matrix::Identity(2, 2);
  indefinite(1, 1) = -1.0;
  CHECK_THROWS_AS(bhattacharyya_gaussian(zero, indefinite, zero, Matrix::Identity(2, 2)), DataError);
}

TEST_CASE("Hellinger distance") {
  CHECK(hellinger(1.0) == 0.0);
  CHECK(hellinger(0.0) == 1.0);
  CHECK(hellinger(1.5) == 0.0);
  CHECK(hellinger(-0.2) == 1.0);
  CHECK(hellinger(std::nan("")) == 1.0);
  CHECK(hellinger(0.75) == doctest::Approx(0.5));
}

TEST_CASE("noiseless data on a matched model scores near zero") {
  // Word covariance position block R and process noise R/2 make the
  // predicted covariance equal R after every update.
  const double r = 1e-3;
  DbnModel m;
  m.vehicle_id = "leader";
  m.combination = fixtures::one_channel();
  m.normalization = fixtures::unit_normalization();
  GngNode x0;
  x0.centroid = v1(0.1);
  GngNode u0;
  u0.centroid = v1(0.3);
  m.letters = {{x0}, {u0}};
  m.transitions = TransitionMatrix(1, 0.0);
  m.transitions.add_count(0, 0);
  m.transitions.finalize();
  m.words.resize(1);
  m.words[0].count = 1;
  m.words[0].mean_derivative = v1(0.3);
  m.words[0].covariance = Matrix::Zero(2, 2);
  m.words[0].covariance(0, 0) = r;
  m.fallback_covariance = m.words[0].covariance;
  m.process_noise = Matrix::Zero(2, 2);
  m.process_noise(0, 0) = r / 2.0;
  m.measurement_noise = m1(r);
  m.control_gain = 0.5;

  std::vector<GeneralizedState> states;
  for (int k = 0; k < 200; ++k) {
    GeneralizedState s;
    s.timestamp_ns = static_cast<Timestamp>(k) * 10'000'000;
    s.value = Vector(2);
    s.value << 0.1 + 0.3 * 0.01 * k, 0.3;
    states.push_back(s);
  }
  ScoreConfig config;
  config.filter.particles = 20;
  const auto report = score_stream(m, states, config);
  REQUIRE(report.samples.size() == states.size());
  CHECK(report.model_name == "leader_T");
  for (const auto& s : report.samples) CHECK(s.theta < 0.05);
  CHECK(report.flagged_count() == 0);
  CHECK(report.intervals.empty());

  states[5].timestamp_ns = states[4].timestamp_ns;
  CHECK_THROWS_AS(score_stream(m, states, config), DataError);
}

TEST_CASE("scores are deterministic and bounded on trained dynamics") {
  const auto model = fixtures::trained_model(11);
  const auto states = fixtures::zigzag(300, 0.5, 0.05, 12);
  ScoreConfig config;
  const auto a = score_stream(model, states, config);
  const auto b = score_stream(model, states, config);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    CHECK(a.samples[k].theta == b.samples[k].theta);
    CHECK(a.samples[k].theta >= 0.0);
    CHECK(a.samples[k].theta <= 1.0);
  }
  config.per_particle = true;
  for (const auto& s : score_stream(model, states, config).samples) {
    CHECK(s.lambda >= 0.0);
    CHECK(s.lambda <= 1.0);
  }
}

TEST_CASE("flagged intervals") {
  const auto r = report_from("m", {0.1, 0.5, 0.6, 0.1, 0.1, 0.7, 0.1, 0.1, 0.1, 0.9, 0.2});
  // Gaps shorter than three samples merge; the three-sample gap does not.
  REQUIRE(r.intervals.size() == 2);
  CHECK(r.intervals[0].first == 1);
  CHECK(r.intervals[0].last == 5);
  CHECK(r.intervals[0].peak_theta == 0.7);
  CHECK(r.intervals[1].first == 9);
  CHECK(r.intervals[1].last == 9);
  CHECK(flag_intervals(r.samples, 0).size() == 4);
  CHECK(report_from("m", {0.1, 0.2, 0.4}).intervals.empty());
}

TEST_CASE("report CSV round trip") {
  const auto r = report_from("leader_VP", {0.123456789, 0.5, 0.987654321, 0.0});
  std::stringstream io;
  write_report_csv(io, r);
  const auto back = parse_report_csv(io, "leader_VP");
  REQUIRE(back.samples.size() == r.samples.size());
  for (std::size_t k = 0; k < r.samples.size(); ++k) {
    CHECK(back.samples[k].timestamp_ns == r.samples[k].timestamp_ns);
    CHECK(std::abs(back.samples[k].theta - r.samples[k].theta) <= 1e-9);
    CHECK(back.samples[k].above_threshold == r.samples[k].above_threshold);
  }
  CHECK(back.intervals.size() == r.intervals.size());

  std::istringstream bad_header("time,theta\n");
  CHECK_THROWS_AS(parse_report_csv(bad_header, "x"), SchemaError);
  std::istringstream bad_cell("timestamp_ns,theta,lambda,flag\n0,abc,1,0\n");
  CHECK_THROWS_AS(parse_report_csv(bad_cell, "x"), ParseError);
}

TEST_CASE("summary mentions events when given") {
  const auto r = report_from("leader_SP", {0.1, 0.5, 0.1});
  const std::vector<EventWindow> w{window("leader", 0.1, 0.1)};
  const auto text = report_summary(r, w);
  CHECK(text.find("\"mean_theta_in_events\": 0.5") != std::string::npos);
  CHECK(report_summary(r).find("events") == std::string::npos);
}

TEST_CASE("compare") {
  SUBCASE("single report") {
    const std::vector<AbnormalityReport> reports{report_from("leader_VP", {0.1, 0.6, 0.7, 0.2})};
    const std::vector<EventWindow> windows{window("leader", 0.1, 0.2)};
    const auto table = compare(reports, windows);
    REQUIRE(table.rows.size() == 1);
    const auto& row = table.rows[0];
    CHECK(row.samples == 2);
    CHECK(row.detected);
    CHECK(row.best);
    CHECK(row.rank == 1);
    CHECK(row.onset_ns == 100'000'000);
    CHECK(row.peak_theta == 0.7);
    CHECK(row.mean_theta == doctest::Approx(0.65));
    CHECK(table.warnings.empty());
  }
  SUBCASE("window outside the data") {
    const std::vector<AbnormalityReport> reports{report_from("leader_VP", {0.1, 0.2})};
    const std::vector<EventWindow> windows{window("leader", 50.0, 60.0)};
    const auto table = compare(reports, windows);
    CHECK(table.rows.empty());
    CHECK(table.warnings.size() == 1);
  }
  SUBCASE("disjoint timelines") {
    const std::vector<AbnormalityReport> reports{report_from("leader_VP", {0.1, 0.2}),
                                                 report_from("leader_SP", {0.1, 0.2}, 10'000'000'000)};
    CHECK_THROWS_AS(compare(reports, std::vector<EventWindow>{}), DataError);
  }
  SUBCASE("ranking and per-vehicle filtering") {
    const std::vector<AbnormalityReport> reports{
        report_from("leader_SV", {0.1, 0.2, 0.3, 0.1}), report_from("leader_VP", {0.1, 0.9, 0.8, 0.1}),
        report_from("leader_SP", {0.1, 0.5, 0.45, 0.1}), report_from("follower_VP", {0.1, 0.95, 0.9, 0.1})};
    const std::vector<EventWindow> windows{window("leader", 0.1, 0.2), window("follower", 0.1, 0.2)};
    const auto table = compare(reports, windows);
    REQUIRE(table.rows.size() == 4);
    CHECK(table.rows[0].model_name == "leader_VP");
    CHECK(table.rows[0].best);
    CHECK(table.rows[1].model_name == "leader_SP");
    CHECK(!table.rows[1].best);
    CHECK(table.rows[1].detected);
    CHECK(table.rows[2].model_name == "leader_SV");
    CHECK(!table.rows[2].detected);
    CHECK(table.rows[2].onset_ns == -1);
    CHECK(table.rows[3].model_name == "follower_VP");
    CHECK(table.rows[3].best);
    const auto csv = table.to_csv();
    CHECK(csv.rfind("window,model,samples,mean_theta,peak_theta,detected,onset_ns,rank,best\n", 0) == 0);
    CHECK(csv.find("leader_SV,2,0.250000,0.300000,not detected,-1,3,0") != std::string::npos);
  }
  SUBCASE("equal peaks fall back to the mean") {
    const std::vector<AbnormalityReport> reports{report_from("a", {0.5, 0.9, 0.1}),
                                                 report_from("b", {0.5, 0.9, 0.6})};
    const std::vector<EventWindow> windows{window("x", 0.0, 0.2)};
    const auto table = compare(reports, windows);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].model_name == "b");
  }
}
