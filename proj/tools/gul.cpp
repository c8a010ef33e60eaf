// gul: replica predictions, ERM simulations and their comparison.
//
//   gul predict  --config cfg.json --out theory.csv [--svg plot.svg]
//   gul simulate --config cfg.json --out sim.csv [--svg plot.svg]
//   gul compare  --theory theory.csv --sim sim.csv --report report.txt [--max-z 3] [--max-dev 0.02]
//   gul moments  --data X.csv [--labels tags.txt] --out-prefix out/stats
//
// Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure in at least
// one point, 3 comparison thresholds breached.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "gul/harness/compare.hpp"
#include "gul/harness/config.hpp"
#include "gul/harness/curve.hpp"
#include "gul/harness/moments.hpp"
#include "gul/harness/svg.hpp"
#include "gul/harness/sweep.hpp"

namespace {

using namespace gul;
using namespace gul::harness;

int finish_sweep(const SweepResult& res, const std::string& out, const std::string& svg) {
  write_csv(out, res.curve);
  if (!svg.empty() && !res.curve.rows.empty()) emit_svg(res.curve, svg);
  bool numerical = false;
  for (const auto& f : res.failures) {
    std::cerr << "warning: " << to_string(f.loss) << " alpha=" << f.alpha << " lambda=" << f.lambda << ": "
              << f.message << '\n';
    numerical = numerical || f.numerical;
  }
  if (res.failures.empty()) return 0;
  return numerical ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-label training loss: replica theory and ERM simulation"};
  app.require_subcommand(1);

  std::string config, out, svg;
  auto* predict = app.add_subcommand("predict", "solve the saddle-point equations over a sweep");
  predict->add_option("--config", config, "experiment config (JSON)")->required();
  predict->add_option("--out", out, "output CSV")->required();
  predict->add_option("--svg", svg, "optional SVG plot");

  auto* simulate = app.add_subcommand("simulate", "fit ERM on sampled data over a sweep");
  simulate->add_option("--config", config, "experiment config (JSON)")->required();
  simulate->add_option("--out", out, "output CSV")->required();
  simulate->add_option("--svg", svg, "optional SVG plot");

  std::string theory_csv, sim_csv, report;
  std::optional<double> max_z, max_dev;
  auto* compare = app.add_subcommand("compare", "compare theory and simulation curves");
  compare->add_option("--theory", theory_csv, "theory CSV")->required();
  compare->add_option("--sim", sim_csv, "simulation CSV")->required();
  compare->add_option("--report", report, "text report path; a CSV is written next to it")->required();
  compare->add_option("--max-z", max_z, "largest acceptable |z|");
  compare->add_option("--max-dev", max_dev, "largest acceptable |deviation|");

  std::string data, labels, prefix;
  auto* moments = app.add_subcommand("moments", "empirical moments and homogeneity of a data file");
  moments->add_option("--data", data, "samples-by-features matrix (CSV or binary)")->required();
  moments->add_option("--labels", labels, "class tag per sample");
  moments->add_option("--out-prefix", prefix, "prefix for output files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*predict) return finish_sweep(run_predict(load_config(config)), out, svg);
    if (*simulate) return finish_sweep(run_simulate(load_config(config)), out, svg);
    if (*compare) {
      Thresholds th;
      if (max_z) th.max_z = *max_z;
      if (max_dev) th.max_dev = *max_dev;
      const auto rep = run_compare(read_csv(theory_csv), read_csv(sim_csv), th);
      std::ofstream txt(report);
      require(static_cast<bool>(txt), ErrorKind::Io, "cannot write '" + report + "'");
      write_report(txt, rep);
      std::ofstream csv(report + ".csv");
      require(static_cast<bool>(csv), ErrorKind::Io, "cannot write '" + report + ".csv'");
      write_report_csv(csv, rep);
      write_report(std::cout, rep);
      return rep.pass ? 0 : 3;
    }
    if (*moments) {
      const auto res = run_moments(data, labels.empty() ? std::nullopt : std::optional<std::string>(labels), prefix);
      std::cout << "samples: " << res.moments.overall.count << "  features: " << res.moments.overall.mean.size()
                << '\n';
      if (res.homogeneity) {
        std::cout << "homogeneity score (correlation): " << format_double(res.homogeneity->score)
                  << "  raw covariance: " << format_double(res.homogeneity->raw_score) << '\n';
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.numerical() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
