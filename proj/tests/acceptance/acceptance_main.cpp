// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../support/oracles.hpp"
#include "../support/random_models.hpp"
#include "metaclust/cli.hpp"
#include "metaclust/cvi.hpp"
#include "metaclust/dpg.hpp"
#include "metaclust/io_util.hpp"
#include "metaclust/seed.hpp"
#include "metaclust/shap.hpp"

using namespace metaclust;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 42;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// 1 -----------------------------------------------------------------------

Outcome shap_oracle() {
  double worst = 0.0;
  std::mt19937_64 rng(kSeed);
  for (std::uint64_t t = 0; t < 100; ++t) {
    const std::size_t width = 3 + t % 5;
    const Forest f = testing_support::random_forest(1000 + t, width, 10, 4, 4);
    const auto x = testing_support::random_point(rng, width);
    const auto fast = forest_shap(f, x).phi;
    const auto slow = brute_force_shapley(f, x);
    for (std::size_t j = 0; j < width; ++j) worst = std::max(worst, std::abs(fast[j] - slow[j]));
  }
  return {worst <= 1e-9, "100 forests, max |tree_shap - brute_force| = " + fmt(worst)};
}

// 2 -----------------------------------------------------------------------

Outcome shap_local_accuracy() {
  double worst = 0.0;
  std::mt19937_64 rng(kSeed + 1);
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const std::size_t width = 2 + t % 12;
    const Forest f = testing_support::random_forest(5000 + t, width, 12, 6, width);
    const auto x = testing_support::random_point(rng, width);
    const auto e = forest_shap(f, x);
    double sum = e.phi0;
    for (double p : e.phi) sum += p;
    worst = std::max(worst, std::abs(sum - f.predict(x)));
  }
  return {worst <= 1e-9, "1000 pairs, max |phi0 + sum(phi) - f(x)| = " + fmt(worst)};
}

// 3 -----------------------------------------------------------------------

bool same(const CviScore& got, const std::optional<double>& want) {
  if (got.defined != want.has_value()) return false;
  return !got.defined || std::abs(got.value - *want) <= 1e-9 * std::max(1.0, std::abs(*want));
}

Outcome cvi_oracles() {
  std::size_t mismatches = 0, defined = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::mt19937_64 rng(derive_seed(kSeed, "acceptance.cvi", s));
    const std::size_t n = std::uniform_int_distribution<std::size_t>(4, 30)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    const int k = std::uniform_int_distribution<int>(2, 5)(rng);
    Matrix x(n, d);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = i < 2 ? static_cast<int>(i) : std::uniform_int_distribution<int>(0, k - 1)(rng);
      for (std::size_t j = 0; j < d; ++j) x(i, j) = std::normal_distribution<double>(2.0 * labels[i], 1.5)(rng);
    }
    const std::pair<CviScore, std::optional<double>> pairs[] = {
        {silhouette(x, labels), oracle::silhouette(x, labels)},
        {davies_bouldin(x, labels), oracle::davies_bouldin(x, labels)},
        {calinski_harabasz(x, labels), oracle::calinski_harabasz(x, labels)},
        {dunn(x, labels), oracle::dunn(x, labels)},
        {c_index(x, labels), oracle::c_index(x, labels)},
        {cop(x, labels), oracle::cop(x, labels)}};
    for (const auto& [got, want] : pairs) {
      mismatches += same(got, want) ? 0 : 1;
      defined += got.defined ? 1 : 0;
    }
  }
  std::size_t ari_failures = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::mt19937_64 rng(derive_seed(kSeed, "acceptance.partition", s));
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 60)(rng);
    const int k = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<int> p(n), q(n);
    for (auto& v : p) v = std::uniform_int_distribution<int>(0, k - 1)(rng);
    for (auto& v : q) v = std::uniform_int_distribution<int>(0, k)(rng);
    std::vector<int> names(static_cast<std::size_t>(k) + 1);
    std::iota(names.begin(), names.end(), 0);
    std::shuffle(names.begin(), names.end(), rng);
    std::vector<int> renamed(n);
    for (std::size_t i = 0; i < n; ++i) renamed[i] = 10 + names[static_cast<std::size_t>(p[i])];
    if (ari(p, p) != 1.0) ++ari_failures;
    if (std::abs(ari(q, p) - oracle::ari(q, p)) > 1e-9) ++ari_failures;
    if (std::abs(ari(p, renamed) - 1.0) > 1e-12) ++ari_failures;
    if (std::abs(ari(q, renamed) - ari(q, p)) > 1e-12) ++ari_failures;
    if (std::abs(nmi(q, renamed) - nmi(q, p)) > 1e-12) ++ari_failures;
  }
  return {mismatches == 0 && ari_failures == 0,
          "300 index comparisons (" + std::to_string(defined) + " defined), " + std::to_string(mismatches) +
              " mismatches; ARI/NMI permutation failures " + std::to_string(ari_failures)};
}

// 4 and 6 -----------------------------------------------------------------

RunConfig desk_config(const fs::path& out, unsigned workers) {
  RunConfig c;
  c.master_seed = kSeed;
  c.corpus.count = 300;
  c.corpus.n_min = 100;
  c.corpus.n_max = 500;
  c.corpus.d_min = 2;
  c.corpus.d_max = 10;
  c.folds = 10;
  c.core_k = 10;
  c.out_dir = out;
  c.workers = workers;
  return c;
}

nlohmann::json run_pipeline(const RunConfig& c) {
  fs::remove_all(c.out_dir);
  cmd_gen(c);
  cmd_extract(c);
  cmd_build_meta(c);
  cmd_train(c);
  cmd_explain_global(c);
  return cmd_ablate(c);
}

std::set<std::string> ids_of(const nlohmann::json& set) {
  std::set<std::string> out;
  for (const auto& f : set.at("features")) out.insert(f.at("id").get<std::string>());
  return out;
}

struct DeskRun {
  double seconds = 0.0;
  bool ok = false;
  std::string error;
};

DeskRun desk_run(const RunConfig& c) {
  DeskRun r;
  const auto t0 = Clock::now();
  try {
    run_pipeline(c);
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = since(t0);
  return r;
}

std::vector<Outcome> desk_ablation(const RunConfig& c, const DeskRun& run) {
  if (!run.ok) return {{false, "pipeline failed: " + run.error}};
  const auto report = nlohmann::json::parse(read_text_file(c.out_dir / artifact::kAblationJson));
  const auto sets = nlohmann::json::parse(read_text_file(c.out_dir / artifact::kAblationSets));
  double time_full = 0, time_core = 0, r2_full = 0, r2_core = 0;
  for (const auto& s : report.at("sets")) {
    if (s.at("name") == "full") {
      time_full = s.at("extraction_time_total");
      r2_full = s.at("r2");
    } else if (s.at("name") == "core") {
      time_core = s.at("extraction_time_total");
      r2_core = s.at("r2");
    }
  }
  const auto full = ids_of(sets.at("sets")[0]), dpg = ids_of(sets.at("sets")[1]), core = ids_of(sets.at("sets")[2]);
  const bool core_in_dpg = std::includes(dpg.begin(), dpg.end(), core.begin(), core.end());
  const bool dpg_in_full = std::includes(full.begin(), full.end(), dpg.begin(), dpg.end());
  const double ratio = time_core / time_full;
  return {
      {ratio <= 0.25, "(a) core/full extraction time = " + fmt(time_core) + "s / " + fmt(time_full) +
                          "s = " + fmt(ratio) + " (bound 0.25)"},
      {r2_core >= r2_full - 0.10, "(b) R2 core " + fmt(r2_core) + " vs full " + fmt(r2_full) + " (allowed drop 0.10)"},
      {r2_full >= 0.5, "(c) R2 full = " + fmt(r2_full) + " (bound 0.5)"},
      {core_in_dpg && dpg_in_full && core.size() == 10 && core.size() < dpg.size(),
       "(d) |full| " + std::to_string(full.size()) + ", |dpg| " + std::to_string(dpg.size()) + ", |core| " +
           std::to_string(core.size()) + ", chain " + (core_in_dpg && dpg_in_full ? "holds" : "broken")},
      {run.seconds < 1800.0, "runtime " + fmt(run.seconds) + "s (bound 1800s)"}};
}

bool timing_artifact(const fs::path& rel) {
  static const std::set<std::string> names = {artifact::kTimings, artifact::kAblationJson, artifact::kAblationCsv,
                                               artifact::kAblationTable};
  return names.count(rel.generic_string()) > 0;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(const fs::path& a, const fs::path& b, double seconds_a, double seconds_b) {
  std::set<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.insert(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.insert(fs::relative(e.path(), b));
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& rel : fa) {
    if (timing_artifact(rel) || !fb.count(rel)) continue;
    ++compared;
    if (slurp(a / rel) != slurp(b / rel)) differing.push_back(rel.string());
  }
  // Timing files: every non-timing field must still agree.
  for (const char* name : {artifact::kAblationJson}) {
    auto ja = nlohmann::json::parse(slurp(a / name)), jb = nlohmann::json::parse(slurp(b / name));
    for (auto* j : {&ja, &jb}) {
      j->erase("workers");
      for (auto& s : j->at("sets")) {
        s.erase("extraction_time_total");
        s.erase("extraction_cpu_time");
      }
    }
    ++compared;
    if (ja != jb) differing.push_back(std::string(name) + " (non-timing fields)");
  }
  std::string detail = std::to_string(compared) + " files compared (workers 8 vs 1), " +
                       std::to_string(differing.size()) + " differ";
  for (const auto& d : differing) detail += " [" + d + "]";
  if (fa != fb) detail += "; file sets differ";
  detail += "; rerun " + fmt(seconds_b) + "s vs " + fmt(seconds_a) + "s";
  return {differing.empty() && fa == fb && compared > 0 && seconds_b < 2.0 * seconds_a + 60.0, detail};
}

// 5 -----------------------------------------------------------------------

Outcome dpg_structure() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // Chain a -> b -> c with unit weights.
  DPGraph chain;
  for (int i = 0; i < 3; ++i) {
    DpgNode n;
    n.predicate = {0, PredicateOp::LessEqual, static_cast<double>(i)};
    n.label = "x0 <= " + std::to_string(i);
    chain.nodes.push_back(n);
  }
  chain.feature_names = {"x0"};
  chain.edges = {{0, 1, 1.0}, {1, 2, 1.0}};
  const auto ct = lrc(chain);
  expect(ct[0].lrc_graph == 1.0 && ct[1].lrc_graph == 0.5 && ct[2].lrc_graph == 0.0, "chain LRC");

  for (std::uint64_t s = 0; s < 10; ++s) {
    std::mt19937_64 rng(derive_seed(kSeed, "acceptance.dpg", s));
    const std::size_t p = 6, rows = 150;
    Matrix x(rows, p);
    std::vector<double> y(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < p - 1; ++j) x(i, j) = std::normal_distribution<double>()(rng);
      x(i, p - 1) = 1.0;  // dummy: constant, never splittable
      y[i] = x(i, 0) + (x(i, 1) > 0.2 ? 1.5 : 0.0) + 0.3 * x(i, 2) * x(i, 3);
    }
    ForestConfig cfg;
    cfg.n_trees = 20;
    const Forest f = fit_forest(x, y, cfg, derive_seed(kSeed, "acceptance.dpg.fit", s));
    const int bins = 1 + static_cast<int>(s % 5);
    Matrix sample(40, p);
    for (std::size_t i = 0; i < 40; ++i) {
      auto src = x.row(i * 3);
      std::copy(src.begin(), src.end(), sample.row(i).begin());
    }
    const DPGraph g = build_dpg(f, sample, bins);
    const auto t = lrc(g);

    expect(g.nodes.size() <= p * 2 * static_cast<std::size_t>(bins) + kTerminalBins, "node bound");
    double total = 0.0, expected = 0.0;
    for (const auto& e : g.edges) total += e.weight;
    for (const auto& path : g.traversals) expected += static_cast<double>(path.size() - 1);
    expect(total == expected, "edge weight conservation");
    expect(g.traversals.size() == 40 * f.trees.size(), "traversal count");
    double max_norm = 0.0;
    for (const auto& e : t) max_norm = std::max(max_norm, e.lrc_normalized);
    expect(max_norm == 1.0, "max lrc_normalized");
    bool dummy_absent = true;
    for (const auto& n : g.nodes)
      if (!n.terminal && n.predicate.feature == static_cast<int>(p - 1)) dummy_absent = false;
    expect(dummy_absent && feature_lrc(g, t)[p - 1] == 0.0, "dummy feature");
  }
  std::string detail = "chain + 10 fitted forests";
  if (failures.empty()) return {true, detail + ", all checks exact"};
  for (const auto& f : failures) detail += " [" + f + "]";
  return {false, detail};
}

// 7 -----------------------------------------------------------------------

Outcome motivating_example(const RunConfig& trained, const DeskRun& run) {
  if (!run.ok) return {false, "needs the trained desk-scale forest"};
  std::size_t dbscan_hits = 0, shap_hits = 0, both = 0;
  std::ostringstream per_seed;
  for (std::uint64_t s = 0; s < 10; ++s) {
    GeneratorSpec g;
    g.kind = GeneratorKind::Moons;
    g.n = 300;
    g.d = 2;
    g.noise = 0.1;
    g.seed = derive_seed(kSeed, "acceptance.moons", s);
    const std::string name = "moons_probe_" + std::to_string(s);
    const fs::path csv = trained.out_dir / "probes" / (name + ".csv");
    save_csv(generate_synthetic(g, name), csv, provenance_line(kSeed));

    const auto rec = cmd_recommend(trained, {csv.string(), "predict", 3, 5});
    bool dbscan = false;
    for (const auto& r : rec.at("recommendations"))
      if (r.at("pipeline").at("algorithm") == "dbscan") dbscan = true;
    const auto e = cmd_explain_local(trained, {csv.string(), "top", false});
    std::set<std::string> top5;
    for (std::size_t i = 0; i < 5 && i < e.at("ranked_meta_features").size(); ++i)
      top5.insert(e.at("ranked_meta_features")[i].at("feature").get<std::string>());
    const bool shap = top5.count("hopkins") && top5.count("SIL");
    dbscan_hits += dbscan;
    shap_hits += shap;
    both += dbscan && shap;
    per_seed << (s ? " " : "") << (dbscan ? 'D' : '-') << (shap ? 'S' : '-');
  }
  return {both >= 7, "dbscan in top-3: " + std::to_string(dbscan_hits) + "/10, hopkins and SIL in top-5 |phi|: " +
                         std::to_string(shap_hits) + "/10, both: " + std::to_string(both) + "/10 (need 7) [" +
                         per_seed.str() + "]"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metaclust acceptance criteria"};
  std::string workdir = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "scratch directory for the desk-scale runs");
  app.add_option("--only", only, "run only these criteria (1-7)");
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };

  bool all_pass = true;
  auto report = [&](int k, const std::string& name, const Outcome& o, double seconds) {
    all_pass = all_pass && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << k << "  " << name << ": " << o.detail << " ("
              << fmt(seconds) << "s)" << std::endl;
  };
  auto timed = [&](int k, const std::string& name, double limit, const std::function<Outcome()>& f) {
    if (!wanted(k)) return;
    const auto t0 = Clock::now();
    Outcome o = f();
    const double s = since(t0);
    if (s >= limit) {
      o.pass = false;
      o.detail += "; over the " + fmt(limit) + "s budget";
    }
    report(k, name, o, s);
  };

  timed(1, "SHAP oracle equivalence", 60, shap_oracle);
  timed(2, "SHAP local accuracy", 60, shap_local_accuracy);
  timed(3, "CVI brute-force equivalence", 60, cvi_oracles);
  timed(5, "DPG structural suite", 60, dpg_structure);

  if (wanted(4) || wanted(6) || wanted(7)) {
    const fs::path root = fs::absolute(workdir);
    fs::create_directories(root);
    const RunConfig eight = desk_config(root / "workers8", 8);
    const DeskRun run8 = desk_run(eight);
    if (wanted(4)) {
      const auto parts = desk_ablation(eight, run8);
      Outcome o{true, ""};
      for (const auto& p : parts) {
        o.pass = o.pass && p.pass;
        o.detail += (o.detail.empty() ? "" : "; ") + p.detail + (p.pass ? "" : " FAIL");
      }
      report(4, "desk-scale ablation", o, run8.seconds);
    }
    if (wanted(6)) {
      const RunConfig one = desk_config(root / "workers1", 1);
      const DeskRun run1 = desk_run(one);
      Outcome o = run8.ok && run1.ok ? determinism(eight.out_dir, one.out_dir, run8.seconds, run1.seconds)
                                     : Outcome{false, "pipeline failed: " + run8.error + run1.error};
      report(6, "determinism across reruns and worker counts", o, run1.seconds);
    }
    if (wanted(7)) {
      const auto t0 = Clock::now();
      const Outcome o = motivating_example(eight, run8);
      report(7, "two-moons motivating example", o, since(t0));
    }
  }

  std::cout << (all_pass ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL") << std::endl;
  return all_pass ? 0 : 1;
}
