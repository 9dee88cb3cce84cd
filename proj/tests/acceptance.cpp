// End-to-end acceptance runs. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Run from the repository root.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "json.hpp"
#include "mgn/gradfield.hpp"
#include "mgn/io.hpp"
#include "mgn/model.hpp"
#include "mgn/transport.hpp"

namespace fs = std::filesystem;
using namespace mgn;

namespace {

// Pinned tolerances.
constexpr double kVerifySeconds = 120.0;
constexpr double kCmgnDb = -30.0;
constexpr double kMmgnDb = -25.0;
constexpr std::size_t kCmgnParams = 14;
constexpr std::size_t kMmgnParams = 22;
constexpr double kGradfieldSeconds = 15 * 60.0;
constexpr double kD2NllSlack = 0.1;
constexpr double kD2CostRatio = 1.15;
constexpr double kD2Seconds = 10 * 60.0;
constexpr double kD16NllSlack = 0.3;
constexpr double kD16CostRatio = 1.10;
constexpr double kD16Seconds = 45 * 60.0;
constexpr double kWhiteningNll = 0.05;
constexpr double kWhiteningCov = 0.02;
constexpr std::size_t kWhiteningSamples = 100000;
constexpr double kAdaptKl = 0.05;
constexpr double kHeldOutKl = 0.1;
constexpr double kAdaptSeconds = 10 * 60.0;
constexpr std::size_t kKlStrictEpochs = 20;
constexpr std::size_t kKlBlock = 10;
constexpr double kConservativity = 1e-6;

const fs::path kOut = MGN_ACCEPTANCE_OUT;

struct Run {
  int code = -1;
  std::string out;
  double seconds = 0.0;
  fs::path dir;
};

Run run_cli(const std::string& sub, const std::string& config, const std::string& tag,
            const std::vector<std::string>& overrides = {}) {
  Run r;
  r.dir = kOut / tag;
  fs::remove_all(r.dir);
  cli::RunConfig rc;
  rc.subcommand = sub;
  rc.config = config;
  rc.out = r.dir;
  rc.overrides = overrides;
  std::ostringstream out;
  const auto t0 = std::chrono::steady_clock::now();
  r.code = cli::run(rc, out, std::cerr);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.out = out.str();
  std::cout << "  [" << tag << "] exit=" << r.code << " " << r.seconds << " s\n" << out.str() << std::flush;
  return r;
}

// value after "key=" in a summary line
double field(const std::string& text, const std::string& key) {
  const auto p = text.find(key + "=");
  if (p == std::string::npos) return std::nan("");
  return std::stod(text.substr(p + key.size() + 1));
}

using Row = std::map<std::string, std::string>;

std::vector<Row> read_csv(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<Row> rows;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    return cells;
  };
  if (std::getline(in, line)) header = split(line);
  while (std::getline(in, line)) {
    const auto cells = split(line);
    Row r;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) r[header[i]] = cells[i];
    rows.push_back(r);
  }
  return rows;
}

const Row* method_row(const std::vector<Row>& rows, const std::string& method) {
  for (const auto& r : rows)
    if (r.at("method") == method) return &r;
  return nullptr;
}

double num(const Row& r, const std::string& key) { return std::stod(r.at(key)); }

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << detail << std::endl;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Checks one trained flow row against the entropy bound and the Bures–Wasserstein oracle.
bool flow_ok(const Row* r, double nll_slack, double cost_ratio, std::string& detail) {
  if (!r) {
    detail += " missing row;";
    return false;
  }
  const double nll = num(*r, "nll"), ent = num(*r, "entropy_bound"), cost = num(*r, "cost"),
               opt = num(*r, "optimal_cost");
  detail += " " + r->at("method") + ": nll-entropy=" + fmt(nll - ent) + " cost/optimal=" + fmt(cost / opt) + ";";
  return nll <= ent + nll_slack && cost <= cost_ratio * opt;
}

bool whitening_ok(const std::vector<Row>& rows, const std::string& config, std::string& detail) {
  const Row* w = method_row(rows, "whitening");
  if (!w) {
    detail += " missing whitening row;";
    return false;
  }
  const double gap = std::abs(num(*w, "nll") - num(*w, "entropy_bound"));
  const auto cfg = nlohmann::json::parse(io::read_text(config)).at("experiment");
  const auto data = transport::random_gaussian(cfg.at("d").get<std::size_t>(), cfg.at("data_seed").get<std::uint64_t>(),
                                               cfg.at("mean_scale").get<double>(), cfg.at("eig_min").get<double>(),
                                               cfg.at("eig_max").get<double>());
  transport::CouplingConfig cc;
  cc.test_samples = kWhiteningSamples;
  cc.seed = nlohmann::json::parse(io::read_text(config)).value("seed", 42u);
  const auto run = transport::run_whitening(data, cc);
  const std::size_t d = data.dim();
  const double cov_err =
      (transport::fit_gaussian(run.mapped).covariance() - linalg::DenseMatrix::identity(d)).frobenius();
  detail += " d=" + std::to_string(d) + ": |nll-entropy|=" + fmt(gap) + " ‖cov-I‖F=" + fmt(cov_err) + ";";
  return gap <= kWhiteningNll && cov_err <= kWhiteningCov;
}

std::vector<fs::path> csv_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") out.push_back(e.path().filename());
  std::sort(out.begin(), out.end());
  return out;
}

bool same_csvs(const fs::path& a, const fs::path& b, std::string& detail) {
  const auto fa = csv_files(a), fb = csv_files(b);
  if (fa != fb || fa.empty()) {
    detail += " file lists differ in " + a.filename().string() + ";";
    return false;
  }
  for (const auto& f : fa)
    if (io::read_text(a / f) != io::read_text(b / f)) {
      detail += " " + a.filename().string() + "/" + f.string() + " differs;";
      return false;
    }
  detail += " " + a.filename().string() + " " + std::to_string(fa.size()) + " files identical;";
  return true;
}

}  // namespace

int main() {
  fs::create_directories(kOut);
  std::cout << "artifacts in " << kOut.string() << "\n";

  // 1. property suite
  {
    const Run r = run_cli("verify", "configs/verify.json", "verify");
    const auto j = nlohmann::json::parse(io::read_text(r.dir / "verify.json"));
    std::string detail = "models=" + std::to_string(j.at("models").get<int>()) + " seconds=" + fmt(r.seconds);
    for (const auto& s : j.at("suites"))
      detail += " " + s.at("name").get<std::string>() + "=" + std::to_string(s.at("passed").get<int>()) + "/" +
                std::to_string(s.at("total").get<int>());
    report(1, r.code == 0 && j.at("ok").get<bool>() && r.seconds <= kVerifySeconds, "property suite", detail);
  }

  // 2 and 7. gradient field
  const Run gc = run_cli("gradfield", "configs/gradfield_cmgn.json", "gradfield_cmgn");
  const Run gm = run_cli("gradfield", "configs/gradfield_mmgn.json", "gradfield_mmgn");
  {
    const double dbc = field(gc.out, "mse_db"), dbm = field(gm.out, "mse_db");
    const double pc = field(gc.out, "params"), pm = field(gm.out, "params");
    const bool ok = gc.code == 0 && gm.code == 0 && dbc <= kCmgnDb && dbm <= kMmgnDb && pc == kCmgnParams &&
                    pm == kMmgnParams && gc.seconds <= kGradfieldSeconds && gm.seconds <= kGradfieldSeconds;
    report(2, ok, "gradient field",
           "cmgn mse_db=" + fmt(dbc) + " (<= " + fmt(kCmgnDb) + ") params=" + fmt(pc) + " " + fmt(gc.seconds) +
               " s; mmgn mse_db=" + fmt(dbm) + " (<= " + fmt(kMmgnDb) + ") params=" + fmt(pm) + " " +
               fmt(gm.seconds) + " s");
  }

  // 3 and 5. coupling, d = 2
  const Run c2 = run_cli("coupling", "configs/coupling_d2.json", "coupling_d2");
  const auto rows2 = c2.code == 0 ? read_csv(c2.dir / "coupling.csv") : std::vector<Row>{};
  {
    std::string detail;
    bool ok = c2.code == 0 && c2.seconds <= kD2Seconds;
    ok = flow_ok(method_row(rows2, "cmgn"), kD2NllSlack, kD2CostRatio, detail) && ok;
    ok = flow_ok(method_row(rows2, "mmgn"), kD2NllSlack, kD2CostRatio, detail) && ok;
    const Row* w = method_row(rows2, "whitening");
    if (w) {
      for (const char* m : {"cmgn", "mmgn"}) {
        const Row* r = method_row(rows2, m);
        const bool below = r && num(*r, "cost") < num(*w, "cost");
        detail += std::string(" ") + m + " cost < whitening " + fmt(num(*w, "cost")) + ": " + (below ? "yes" : "no") + ";";
        ok = ok && below;
      }
    } else {
      ok = false;
    }
    report(3, ok, "coupling d=2", detail + " " + fmt(c2.seconds) + " s");
  }

  // 4. coupling, d = 16
  const Run c16 = run_cli("coupling", "configs/coupling_d16.json", "coupling_d16");
  const auto rows16 = c16.code == 0 ? read_csv(c16.dir / "coupling.csv") : std::vector<Row>{};
  {
    std::string detail;
    bool ok = c16.code == 0 && c16.seconds <= kD16Seconds;
    ok = flow_ok(method_row(rows16, "cmgn"), kD16NllSlack, kD16CostRatio, detail) && ok;
    ok = flow_ok(method_row(rows16, "mmgn"), kD16NllSlack, kD16CostRatio, detail) && ok;
    report(4, ok, "coupling d=16", detail + " " + fmt(c16.seconds) + " s");
  }

  {
    std::string detail;
    bool ok = whitening_ok(rows2, "configs/coupling_d2.json", detail);
    ok = whitening_ok(rows16, "configs/coupling_d16.json", detail) && ok;
    report(5, ok, "whitening exactness", detail);
  }

  // 6. colour adaptation
  const Run ad = run_cli("adapt", "configs/adapt.json", "adapt");
  {
    bool ok = ad.code == 0 && ad.seconds <= kAdaptSeconds;
    std::string detail = fmt(ad.seconds) + " s";
    if (ad.code == 0) {
      const auto j = nlohmann::json::parse(io::read_text(ad.dir / "adaptation.json"));
      const double kl = j.at("kl").get<double>();
      detail = "kl=" + fmt(kl) + " (<= " + fmt(kAdaptKl) + ")";
      ok = ok && kl <= kAdaptKl && !j.at("tests").empty();
      for (const auto& t : j.at("tests")) {
        const double tk = t.at("kl").get<double>();
        detail += " held-out " + t.at("image").get<std::string>() + " kl=" + fmt(tk) + " (<= " + fmt(kHeldOutKl) + ")";
        ok = ok && tk <= kHeldOutKl;
      }
      // Per-epoch KL: strictly decreasing early on, then decreasing block means once minibatch noise dominates.
      std::vector<double> kls;
      for (const auto& row : read_csv(ad.dir / "epoch_kl.csv")) kls.push_back(num(row, "kl"));
      bool early = kls.size() >= kKlStrictEpochs;
      for (std::size_t e = 1; early && e < kKlStrictEpochs; ++e) early = kls[e] < kls[e - 1];
      std::vector<double> blocks;
      for (std::size_t b = 0; b + kKlBlock <= kls.size(); b += kKlBlock)
        blocks.push_back(std::accumulate(kls.begin() + b, kls.begin() + b + kKlBlock, 0.0) / kKlBlock);
      bool block_ok = blocks.size() >= 2;
      for (std::size_t b = 1; block_ok && b < blocks.size(); ++b) block_ok = blocks[b] < blocks[b - 1];
      detail += " epoch kl strictly decreasing over first " + std::to_string(kKlStrictEpochs) + ": " +
                (early ? "yes" : "no") + ", " + std::to_string(kKlBlock) + "-epoch means decreasing: " +
                (block_ok ? "yes" : "no");
      ok = ok && early && block_ok;
      detail += " " + fmt(ad.seconds) + " s";
    }
    report(6, ok, "colour adaptation", detail);
  }

  // 7. conservativity of the trained gradient-field models
  {
    bool ok = gc.code == 0 && gm.code == 0;
    std::string detail;
    for (const Run* r : {&gc, &gm}) {
      if (r->code != 0) continue;
      const auto m = model::load_model(r->dir / "model.json");
      const auto loop = gradfield::loop_integral(m, 10000);
      const double rel = std::abs(loop.circulation) / loop.mean_norm;
      detail += r->dir.filename().string() + " |circulation|/mean|g|=" + fmt(rel) + "; ";
      ok = ok && rel <= kConservativity;
    }
    report(7, ok, "conservativity", detail);
  }

  // 8. determinism: repeat the runs that finish in about a minute and compare every CSV
  {
    std::string detail;
    bool ok = true;
    const Run g2 = run_cli("gradfield", "configs/gradfield_mmgn.json", "repeat_gradfield_mmgn");
    ok = same_csvs(gm.dir, g2.dir, detail) && ok;
    const Run c2b = run_cli("coupling", "configs/coupling_d2.json", "repeat_coupling_d2");
    ok = same_csvs(c2.dir, c2b.dir, detail) && ok;
    const Run ad2 = run_cli("adapt", "configs/adapt.json", "repeat_adapt");
    ok = same_csvs(ad.dir, ad2.dir, detail) && ok;
    ok = ok && io::read_text(ad.dir / "mapped_day_test.png") == io::read_text(ad2.dir / "mapped_day_test.png");
    report(8, ok, "determinism", detail);
  }

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
