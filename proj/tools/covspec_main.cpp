#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "covspec/error.hpp"
#include "covspec/pipeline.hpp"

namespace {

// K orders come in as "auto" or an integer.
std::optional<int> parse_order(const std::string& text) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t pos = 0;
    const int k = std::stoi(text, &pos);
    if (pos == text.size()) return k;
  } catch (const std::exception&) {
  }
  throw covspec::ValidationError("order must be an integer or 'auto', got '" + text + "'");
}

struct Options {
  covspec::RunConfig config;
  std::string k1 = "auto", k2 = "auto", k3 = "auto";
  std::vector<double> origin;
  std::string rule = "cv";
  bool parametric_only = false;
  std::string report;
};

void add_fit_options(CLI::App* app, Options& o) {
  auto& c = o.config;
  app->add_option("--data", c.data, "Observation CSV (long or wide format)");
  app->add_option("--stations", c.stations, "Station table (id plus lon/lat or x_km/y_km)");
  app->add_option("--span", c.span, "Modified Daniell span (odd)")->capture_default_str();
  app->add_option("--display-spans", c.display_spans, "Extra spans for spectra dumps")->capture_default_str();
  app->add_option("--origin", o.origin, "Projection origin: lon lat")->expected(2);
  app->add_flag("--wind-preprocess", c.wind_preprocess, "sqrt, remove day-of-year means, center");
  app->add_flag("--per-station-seasonal", c.per_station_seasonal, "Seasonal means per station");
}

void finish(Options& o) {
  auto& c = o.config;
  c.k1 = parse_order(o.k1);
  c.k2 = parse_order(o.k2);
  c.k3 = parse_order(o.k3);
  if (!o.origin.empty()) c.origin = Eigen::Vector2d(o.origin[0], o.origin[1]);
  c.nonparametric = !o.parametric_only;
  c.smoother.rule = o.rule == "silverman" ? covspec::BandwidthRule::Silverman : covspec::BandwidthRule::CrossValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariance-spectral modelling of spatiotemporal station data"};
  app.require_subcommand(1);
  Options o;
  auto& c = o.config;

  auto* fit = app.add_subcommand("fit", "Estimate k, p, gamma, v and theta");
  add_fit_options(fit, o);
  fit->add_option("--spectra", c.spectra, "Spectra CSV from a previous run (skips ingest)");
  fit->add_option("--out,-o", c.output, "Output directory")->required();
  fit->add_option("--mask-fraction", c.mask_fraction, "Low-frequency share left out of the p/gamma fit")
      ->capture_default_str();
  fit->add_option("--k1", o.k1, "Order of the k cosine part or 'auto'")->capture_default_str();
  fit->add_option("--k2", o.k2, "Order of log gamma or 'auto'")->capture_default_str();
  fit->add_option("--k3", o.k3, "Order of theta or 'auto'")->capture_default_str();
  fit->add_flag("--parametric-only", o.parametric_only, "Skip the kernel-smoothed curves");
  fit->add_option("--bandwidth", c.smoother.bandwidth, "Kernel bandwidth (0 = automatic)")->capture_default_str();
  fit->add_option("--bandwidth-rule", o.rule, "cv or silverman")
      ->check(CLI::IsMember({"cv", "silverman"}))
      ->capture_default_str();
  fit->add_option("--kernel-degree", c.smoother.degree, "0 = Nadaraya-Watson, 1 = local linear")
      ->capture_default_str();
  fit->add_option("--seed", c.seed, "Recorded in the manifest")->capture_default_str();

  auto* spectra = app.add_subcommand("spectra", "Dump raw and smoothed cross-spectra tables");
  add_fit_options(spectra, o);
  spectra->add_option("--out,-o", c.output, "Output directory")->required();

  auto* sim = app.add_subcommand("simulate", "Simulate a field from a model JSON");
  sim->add_option("--model", c.model, "Model JSON")->required();
  sim->add_option("--stations", c.stations, "Station table; omitted = random sites");
  sim->add_option("--sites", c.n_sites, "Number of random sites")->capture_default_str();
  sim->add_option("--box", c.box_km, "Side of the random-site square (km)")->capture_default_str();
  sim->add_option("--length,-T", c.T, "Series length (even)")->capture_default_str();
  sim->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sim->add_option("--origin", o.origin, "Projection origin: lon lat")->expected(2);
  sim->add_option("--out,-o", c.output, "Output CSV")->required();

  auto* rep = app.add_subcommand("report", "Print a summary of report.json");
  rep->add_option("report", o.report, "report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    finish(o);
    if (*fit) {
      const auto report = covspec::run_fit(c);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "wrote " << (c.output / "report.json").string() << "\n";
    } else if (*spectra) {
      covspec::run_spectra(c);
      std::cout << "wrote spectra tables to " << c.output.string() << "\n";
    } else if (*sim) {
      const auto sample = covspec::run_simulate(c);
      std::cout << "wrote " << sample.values.rows() << " x " << sample.values.cols() << " sample to "
                << c.output.string() << "\n";
    } else if (*rep) {
      std::cout << covspec::render_report(covspec::io::read_text(o.report));
    }
  } catch (const covspec::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const covspec::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
