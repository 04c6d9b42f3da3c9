// One [PASS]/[FAIL] line per criterion. Tolerances are pinned below; the exit
// status is 0 only if every requested criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include "cfaudit/audit.hpp"
#include "cfaudit/error.hpp"
#include "cfaudit/flow.hpp"
#include "cfaudit/gan.hpp"
#include "cfaudit/random.hpp"
#include "cfaudit/scm.hpp"
#include "cfaudit/stats.hpp"
#include "cfaudit/tensor.hpp"

using namespace cfaudit;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr std::size_t kC1Samples = 10000;
constexpr double kC1Alpha = 0.01;
constexpr std::size_t kC1Queries = 1000;
constexpr double kC1AbsTol = 1e-9;
// Criterion 2
constexpr std::size_t kC2Samples = 100000;
constexpr std::size_t kC2Queries = 1000;
constexpr double kC2MaxDisagreement = 0.05;
constexpr double kC2MinKsP = 0.01;
// Criterion 3
const std::vector<double> kC3Thresholds = {0.0, 0.13, 1.6, 3.1, 6.4, 12.6};
constexpr std::size_t kC3Samples = 100000;
constexpr double kC3MaxZeroArmDisagreement = 0.05;
constexpr double kC3MaxWorstCase = 0.15;
// Criterion 4
constexpr std::size_t kC4PerBin = 2000;
constexpr int kC4Bins = 4;
constexpr double kC4MinEnergyP = 0.01;
constexpr double kC4MinCrossMse = 0.1;
constexpr std::size_t kC4Queries = 2000;
// Criterion 5
const std::vector<std::uint64_t> kC5Seeds = {1, 2, 3};
const std::vector<double> kC5Thresholds = {0.125, 0.25, 0.5, 1.0, 2.0};
constexpr std::size_t kC5Samples = 20000;
constexpr double kC5MinNormalizedLoss = 99.0;
constexpr double kC5DisagreementCap = 1.0;
constexpr double kC5MinDrop = 0.3;
constexpr double kC5WorstLo = 0.7;
constexpr double kC5WorstHi = 1.3;
constexpr std::size_t kC5RequiredSeeds = 2;
// Reported, not gating: the learned adversary should match the analytic one.
constexpr double kC5SoundnessSlack = 0.2;
// Criterion 6
constexpr double kC6FdStep = 1e-5;
constexpr double kC6Rel = 1e-4;
constexpr double kC6Abs = 1e-6;
constexpr double kC6Small = 1e-2;
constexpr int kC6DensityDraws = 20;
constexpr double kC6DensityTol = 1e-3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

std::vector<double> outcomes_at(const Dataset& d, double t) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < d.t.rows(); ++i) {
    if (d.t(i, 0) == t) out.push_back(d.y(i, 0));
  }
  return out;
}

// Mean ||cf - evidence_y||^2 over the queries the predictor can answer.
double evidence_mse(const CounterfactualPredictor& p, const std::vector<CounterfactualQuery>& qs) {
  double total = 0.0;
  std::size_t used = 0;
  for (const CounterfactualQuery& q : qs) {
    try {
      const Vec cf = p.counterfactual(q);
      for (std::size_t k = 0; k < cf.size(); ++k) total += (cf[k] - q.evidence_y[k]) * (cf[k] - q.evidence_y[k]);
      ++used;
    } catch (const Error&) {
    }
  }
  if (used == 0) throw std::runtime_error("no answerable queries");
  return total / static_cast<double>(used);
}

// Motivating pair -----------------------------------------------------------

Outcome criterion_1() {
  const Scm m1 = build_motivating_1();
  const Scm m2 = build_motivating_2();
  // Roughly kC1Samples rows per condition.
  const Dataset d1 = sample(m1, 2 * kC1Samples, 101);
  const Dataset d2 = sample(m2, 2 * kC1Samples, 102);
  double min_p = 1.0;
  for (double t : {0.0, 1.0}) {
    min_p = std::min(min_p, ks_two_sample(outcomes_at(d1, t), outcomes_at(d2, t)).p_value);
  }

  const std::vector<double> y0 = outcomes_at(d1, 0.0);
  double max_err = 0.0;
  for (std::size_t i = 0; i < kC1Queries; ++i) {
    const CounterfactualQuery q{{0.0}, {y0[i]}, {1.0}};
    const double diff = counterfactual(m1, m1.outcome().name, q)[0] - counterfactual(m2, m2.outcome().name, q)[0];
    max_err = std::max(max_err, std::abs(diff - (1.0 + 2.0 * y0[i])));
  }
  return {min_p > kC1Alpha && max_err <= kC1AbsTol,
          "min KS p " + fmt(min_p) + " (> " + fmt(kC1Alpha) + "), max |diff - (1 + 2y)| " + fmt(max_err) +
              " (<= " + fmt(kC1AbsTol) + ")"};
}

// Flow identifiability ------------------------------------------------------

Outcome criterion_2() {
  const Dataset data = sample(build_intensity_scm(), kC2Samples, 201);
  FitConfig c;
  c.seed = 11;
  const FlowParams a = flow_fit(data, c).params;
  c.seed = 12;
  const FlowParams b = flow_fit(data, c).params;

  const QueryBatch qs = draw_queries(data, kC2Queries, 202);
  const FittedModel fa(a), fb(b);
  const double d = disagreement(fa, fb, qs, compute_normalizer(fa, qs));

  std::vector<double> ua, ub;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const CounterfactualQuery q = qs.query(i);
    ua.push_back(flow_inverse(a, q.evidence_y[0], q.evidence_t));
    ub.push_back(flow_inverse(b, q.evidence_y[0], q.evidence_t));
  }
  const MonotoneMap g = recover_indeterminacy(ua, ub);
  const double p = ks_two_sample(g.apply(ub), ua).p_value;
  return {d < kC2MaxDisagreement && p > kC2MinKsP,
          "normalized MSE " + fmt(d) + " (< " + fmt(kC2MaxDisagreement) + "), monotone map KS p " + fmt(p) + " (> " +
              fmt(kC2MinKsP) + ")"};
}

// Flow audit curve ----------------------------------------------------------

Outcome criterion_3() {
  const Dataset data = sample(build_intensity_scm(), kC3Samples, 301);
  AuditConfig cfg;
  cfg.family = ModelFamily::Flow;
  cfg.thresholds = kC3Thresholds;
  cfg.threads = 1;
  const AuditReport r = sweep(data, cfg).report;

  bool increasing = true;
  std::string losses;
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    const AuditCurvePoint& p = r.curve[i];
    if (p.error) return {false, "arm " + std::to_string(i) + " failed: " + *p.error};
    losses += (i ? "," : "") + fmt(p.generation_loss);
    // Strict increase is required among the positive thresholds only.
    if (i > 1 && !(p.generation_loss > r.curve[i - 1].generation_loss)) increasing = false;
  }
  const double d0 = r.curve.front().achieved_disagreement;
  const bool ok = increasing && d0 <= kC3MaxZeroArmDisagreement && r.verdict == Verdict::IdentifiableWithinTolerance &&
       r.worst_case_error <= kC3MaxWorstCase;
  return {ok, "generation loss [" + losses + "] " + (increasing ? "" : "not ") +
                  "strictly increasing after threshold 0, threshold-0 disagreement " + fmt(d0) +
                  " (<= " + fmt(kC3MaxZeroArmDisagreement) + "), worst case " + fmt(r.worst_case_error) + " (<= " +
                  fmt(kC3MaxWorstCase) + "), verdict " + std::string(to_string(r.verdict))};
}

// Rotation counterexample ---------------------------------------------------

// First `per_bin` rows whose parent falls in each [edges[b], edges[b+1]).
std::vector<Matrix> bin_rows(const Dataset& d, const std::vector<double>& edges, std::size_t per_bin) {
  std::vector<Matrix> bins(edges.size() - 1, Matrix(static_cast<Eigen::Index>(per_bin), d.y.cols()));
  std::vector<std::size_t> fill(bins.size(), 0);
  for (Eigen::Index i = 0; i < d.t.rows(); ++i) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), d.t(i, 0));
    if (it == edges.begin() || it == edges.end()) continue;
    const auto b = static_cast<std::size_t>(it - edges.begin() - 1);
    if (fill[b] < per_bin) bins[b].row(static_cast<Eigen::Index>(fill[b]++)) = d.y.row(i);
  }
  for (std::size_t f : fill) {
    if (f < per_bin) throw std::runtime_error("parent bin under-filled");
  }
  return bins;
}

Outcome criterion_4() {
  const Scm base = build_intensity_2d_scm();
  const std::string node = base.outcome().name;
  const ParentPartition in_b = median_partition(base, node);
  const Scm rot = make_rotated_counterexample(base, node, in_b, std::numbers::pi / 4);

  const Dataset ref = sample(base, 20001, 401);
  std::vector<double> ts(ref.t.data(), ref.t.data() + ref.t.rows());
  std::sort(ts.begin(), ts.end());
  std::vector<double> edges = {-1e300};
  for (int b = 1; b < kC4Bins; ++b) edges.push_back(ts[ts.size() * static_cast<std::size_t>(b) / kC4Bins]);
  edges.push_back(1e300);

  const std::size_t draws = 3 * kC4PerBin * kC4Bins;
  const auto real = bin_rows(sample(base, draws, 402), edges, kC4PerBin);
  const auto alt = bin_rows(sample(rot, draws, 403), edges, kC4PerBin);
  double min_p = 1.0;
  for (std::size_t b = 0; b < real.size(); ++b) {
    min_p = std::min(min_p, energy_two_sample(real[b], alt[b], 200, 404 + b).p_value);
  }

  // Queries whose intervention crosses the partition boundary.
  std::vector<CounterfactualQuery> cross;
  Rng rng = make_rng(405);
  std::uniform_int_distribution<Eigen::Index> pick(0, ref.t.rows() - 1);
  while (cross.size() < kC4Queries) {
    const Eigen::Index i = pick(rng), j = pick(rng);
    const Vec t = row_of(ref.t, i), t2 = row_of(ref.t, j);
    if (in_b(t) != in_b(t2)) cross.push_back({t, row_of(ref.y, i), t2});
  }
  // Normalized as in the audit: step-one counterfactual vs evidence MSE over
  // queries drawn from the data.
  const ScmPredictor pa(base), pb(rot);
  const double normalizer = evidence_mse(pa, to_queries(draw_queries(ref, kC4Queries, 406)));
  const double mse = counterfactual_agreement(pa, pb, cross, normalizer).value;
  return {min_p > kC4MinEnergyP && mse > kC4MinCrossMse,
          "min per-bin energy p " + fmt(min_p) + " (> " + fmt(kC4MinEnergyP) + ", n = " + std::to_string(kC4PerBin) +
              "/bin), cross-partition normalized MSE " + fmt(mse) + " (> " + fmt(kC4MinCrossMse) + ")"};
}

// GAN audit curve -----------------------------------------------------------

Outcome gan_audit_seed(std::uint64_t seed) {
  const Scm scm = build_nonidentifiable_2d(seed);
  const Dataset data = sample(scm, kC5Samples, derive_seed(seed, 0xda7a));

  // Analytic adversary: the quarter-turn counterexample fits equally well.
  const std::string node = scm.outcome().name;
  const Scm quarter = make_rotated_counterexample(scm, node, median_partition(scm, node), std::numbers::pi / 2);
  const std::vector<CounterfactualQuery> qs = to_queries(draw_queries(data, 2000, derive_seed(seed, 0x5011)));
  const ScmPredictor truth(scm), rotated(quarter);
  const double truth_norm = evidence_mse(truth, qs);
  const double analytic = counterfactual_agreement(truth, rotated, qs, truth_norm).value;

  AuditConfig cfg;
  cfg.family = ModelFamily::Gan;
  cfg.thresholds = kC5Thresholds;
  cfg.seeds = {seed, seed + 1, seed + 2};
  cfg.threads = 1;
  const AuditReport r = sweep(data, cfg).report;

  const double step1 = -r.generation_loss_step1;
  bool fit_ok = step1 >= kC5MinNormalizedLoss;
  std::string curve = "step1 " + fmt(step1);
  for (const AuditCurvePoint& p : r.curve) {
    if (p.error) return {false, "arm at " + fmt(p.threshold) + " failed: " + *p.error};
    curve += "; " + fmt(p.threshold) + " -> d " + fmt(p.achieved_disagreement) + ", " + fmt(-p.generation_loss) + "%";
    if (p.achieved_disagreement <= kC5DisagreementCap && -p.generation_loss < kC5MinNormalizedLoss) fit_ok = false;
  }
  const double drop = step1 + r.curve.back().generation_loss;
  const bool worst_ok = r.worst_case_error >= kC5WorstLo && r.worst_case_error <= kC5WorstHi;
  return {fit_ok && drop >= kC5MinDrop && worst_ok,
          curve + "; drop " + fmt(drop) + ", worst case " + fmt(r.worst_case_error) + "; truth normalizer " +
              fmt(truth_norm) + ", quarter-turn counterexample disagreement " + fmt(analytic) +
              (analytic <= r.worst_case_error + kC5SoundnessSlack ? " (within" : " (exceeds") + " worst case + " +
              fmt(kC5SoundnessSlack) + ")"};
}

Outcome criterion_5() {
  std::size_t passed = 0;
  std::string detail;
  for (std::uint64_t seed : kC5Seeds) {
    Outcome o;
    try {
      o = gan_audit_seed(seed);
    } catch (const std::exception& e) {
      o = {false, e.what()};
    }
    std::cout << "  criterion 5 seed " << seed << (o.pass ? " ok: " : " not met: ") << o.detail << std::endl;
    passed += o.pass ? 1 : 0;
  }
  return {passed >= kC5RequiredSeeds,
          std::to_string(passed) + " of " + std::to_string(kC5Seeds.size()) + " seeds meet loss >= " +
              fmt(kC5MinNormalizedLoss) + "% for disagreement <= " + fmt(kC5DisagreementCap) + ", drop >= " +
              fmt(kC5MinDrop) + " pp, worst case in [" + fmt(kC5WorstLo) + ", " + fmt(kC5WorstHi) + "] (need " +
              std::to_string(kC5RequiredSeeds) + ")"};
}

// Numerical core ------------------------------------------------------------

Matrix uniform_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

// Number of entries whose analytic gradient misses central differences.
std::size_t gradient_violations(std::vector<Parameter*> params, const std::function<Tensor(Tape&)>& loss) {
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<Matrix> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);
  auto eval = [&] {
    Tape tape;
    return loss(tape).item();
  };
  std::size_t bad = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k]->value.size(); ++i) {
      double& x = params[k]->value.data()[i];
      const double saved = x;
      x = saved + kC6FdStep;
      const double up = eval();
      x = saved - kC6FdStep;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2 * kC6FdStep);
      const double a = analytic[k].data()[i];
      const bool ok = std::abs(a) < kC6Small ? std::abs(a - numeric) <= kC6Abs
                                              : std::abs(a - numeric) <= kC6Rel * std::abs(a);
      bad += ok ? 0 : 1;
    }
  }
  return bad;
}

Outcome criterion_6() {
  Rng rng(601);
  Parameter a("a", uniform_matrix(rng, 3, 4, -2, 2));
  Parameter b("b", uniform_matrix(rng, 3, 4, -2, 2));
  Parameter pos("pos", uniform_matrix(rng, 3, 4, 0.5, 2));
  Parameter row("row", uniform_matrix(rng, 1, 4, -2, 2));
  Parameter col("col", uniform_matrix(rng, 3, 1, 0.5, 2));
  Parameter w("w", uniform_matrix(rng, 4, 2, -2, 2));
  const Matrix weights = uniform_matrix(rng, 3, 5, -2, 2);
  auto contract = [&](Tape& t, Tensor x) {
    return sum(x * t.constant(weights.topLeftCorner(x.rows(), x.cols())));
  };
  using Loss = std::function<Tensor(Tape&)>;
  const std::vector<std::pair<std::vector<Parameter*>, Loss>> cases = {
      {{&a, &b}, [&](Tape& t) { return contract(t, t.leaf(a) + t.leaf(b)); }},
      {{&a, &row}, [&](Tape& t) { return contract(t, t.leaf(a) + t.leaf(row)); }},
      {{&a, &col}, [&](Tape& t) { return contract(t, t.leaf(a) - t.leaf(col)); }},
      {{&a, &b}, [&](Tape& t) { return contract(t, t.leaf(a) * t.leaf(b)); }},
      {{&a, &row}, [&](Tape& t) { return contract(t, t.leaf(row) * t.leaf(a)); }},
      {{&a, &pos}, [&](Tape& t) { return contract(t, t.leaf(a) / t.leaf(pos)); }},
      {{&a, &col}, [&](Tape& t) { return contract(t, t.leaf(a) / t.leaf(col)); }},
      {{&a}, [&](Tape& t) { return contract(t, -t.leaf(a)); }},
      {{&a}, [&](Tape& t) { return contract(t, 2.5 * t.leaf(a)); }},
      {{&a}, [&](Tape& t) { return contract(t, t.leaf(a) + 1.5); }},
      {{&a, &w}, [&](Tape& t) { return contract(t, matmul(t.leaf(a), t.leaf(w))); }},
      {{&a}, [&](Tape& t) { return contract(t, sigmoid(t.leaf(a))); }},
      {{&a}, [&](Tape& t) { return contract(t, tanh(t.leaf(a))); }},
      {{&pos}, [&](Tape& t) { return contract(t, log(t.leaf(pos))); }},
      {{&a}, [&](Tape& t) { return contract(t, exp(t.leaf(a))); }},
      {{&a}, [&](Tape& t) { return contract(t, softplus(t.leaf(a))); }},
      {{&a}, [&](Tape& t) { return contract(t, square(t.leaf(a))); }},
      {{&a}, [&](Tape& t) { return square(sum(t.leaf(a))); }},
      {{&a}, [&](Tape& t) { return square(mean(t.leaf(a))); }},
      {{&a}, [&](Tape& t) { return contract(t, square(row_sum(t.leaf(a)))); }},
      {{&a, &col}, [&](Tape& t) { return contract(t, square(concat(t.leaf(a), t.leaf(col)))); }},
      {{&a}, [&](Tape& t) { return contract(t, square(t.slice(t.leaf(a), 1, 3))); }},
  };
  std::size_t bad_ops = 0;
  for (const auto& [params, loss] : cases) bad_ops += gradient_violations(params, loss) > 0 ? 1 : 0;

  std::uniform_real_distribution<double> slope(-3, 3), intercept(-5, 5), ls_slope(-0.4, 0.4), ls_int(-1.2, 0.8),
      tn(1.0, 4.0);
  double worst = 0.0;
  for (int i = 0; i < kC6DensityDraws; ++i) {
    const FlowParams p = FlowParams::affine(slope(rng), intercept(rng), ls_slope(rng), ls_int(rng));
    const double t = tn(rng);
    auto density = [&](double y) { return std::exp(flow_log_prob(p, y, {t})); };
    const double mass = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        density, p.rescale.offset, p.rescale.offset + p.rescale.span, 20, 1e-12);
    worst = std::max(worst, std::abs(mass - 1.0));
  }
  return {bad_ops == 0 && worst <= kC6DensityTol,
          std::to_string(cases.size() - bad_ops) + "/" + std::to_string(cases.size()) +
              " op checks within rel " + fmt(kC6Rel) + ", max |mass - 1| over " + std::to_string(kC6DensityDraws) +
              " flows " + fmt(worst) + " (<= " + fmt(kC6DensityTol) + ")"};
}

// CLI determinism -----------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool is_manifest(const fs::path& p) {
  const std::string name = p.filename().string();
  return name == "manifest.json" || name.ends_with(".manifest.json");
}

std::string comparable(const fs::path& p) {
  if (!is_manifest(p)) return slurp(p);
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(slurp(p));
  j.erase("started_at");
  j.erase("wall_clock_seconds");
  return j.dump();
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

Outcome criterion_7(const fs::path& tool, const fs::path& workdir) {
  const std::vector<std::string> commands = {
      "gen-data intensity --n 3000 --seed 7 --out data.csv",
      "gen-data intensity-2d --n 2000 --seed 7 --out data2.csv",
      "gen-data motivating-1 --n 500 --seed 7 --out m1.csv",
      "fit data.csv --family flow --config flow.cfg --seed 3 --out flow.json",
      "fit data2.csv --family gan --config gan.cfg --seed 3 --out gan.json",
      "audit data.csv --family flow --thresholds 0,0.5,1 --config audit_flow.cfg --seed 4 --out audit_flow",
      "audit data2.csv --family gan --thresholds 0,0.5 --config audit_gan.cfg --seed 4 --out audit_gan",
      "cf flow.json --t 2 --y 120 --t-prime 3 > cf_flow.json",
      "cf gan.json --t 2 --y 120,90 --t-prime 3 > cf_gan.json",
      "cf intensity --t 2 --y 120 --t-prime 3 > cf_scm.json",
      "zoo-list > zoo.txt",
  };
  const std::vector<std::pair<std::string, std::string>> configs = {
      {"flow.cfg", "flow.steps = 300\n"},
      {"gan.cfg", "gan.steps = 60\ngan.width = 16\ngan.batch_size = 64\n"},
      {"audit_flow.cfg", "flow.steps = 300\nquery_count = 300\n"},
      {"audit_gan.cfg", "gan.steps = 40\ngan.width = 16\ngan.batch_size = 64\nquery_count = 200\n"},
  };
  std::vector<fs::path> runs;
  for (const char* name : {"run_a", "run_b"}) {
    const fs::path dir = workdir / "c7" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const auto& [file, text] : configs) std::ofstream(dir / file) << text;
    for (const std::string& cmd : commands) {
      const std::string redirect = cmd.find('>') == std::string::npos ? " >> stdout.txt" : "";
      const std::string line =
          "cd " + shell_quote(dir.string()) + " && " + shell_quote(tool.string()) + " " + cmd + redirect;
      if (std::system(line.c_str()) != 0) return {false, "command failed: " + cmd};
    }
    runs.push_back(dir);
  }

  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(runs[0])) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), runs[0]);
    const fs::path other = runs[1] / rel;
    ++compared;
    if (!fs::exists(other) || comparable(entry.path()) != comparable(other)) differing.push_back(rel.string());
  }
  std::string detail = std::to_string(compared) + " artifacts from " + std::to_string(commands.size()) +
                       " commands compared, " + std::to_string(differing.size()) + " differ";
  for (const std::string& d : differing) detail += " " + d;
  return {differing.empty() && compared > commands.size(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> criteria;
  std::string tool;
  std::string workdir = "acceptance_work";
  app.add_option("--criterion", criteria, "Criteria to run (default all)")->check(CLI::Range(1, 7));
  app.add_option("--tool", tool, "Path to the cfaudit executable (criterion 7)");
  app.add_option("--workdir", workdir, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  if (criteria.empty()) criteria = {1, 2, 3, 4, 5, 6, 7};

  bool all = true;
  for (int c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      switch (c) {
        case 1: o = criterion_1(); break;
        case 2: o = criterion_2(); break;
        case 3: o = criterion_3(); break;
        case 4: o = criterion_4(); break;
        case 5: o = criterion_5(); break;
        case 6: o = criterion_6(); break;
        case 7:
          if (tool.empty()) {
            o = {false, "--tool is required"};
          } else {
            o = criterion_7(fs::absolute(tool), fs::absolute(workdir));
          }
          break;
        default: break;
      }
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << c << ": " << o.detail << " (" << fmt(secs)
              << " s)" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
