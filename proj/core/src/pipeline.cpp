#include "covspec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "covspec/error.hpp"
#include "covspec/simulate.hpp"
#include "json.hpp"

namespace covspec {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

// Runs a stage and prefixes its errors with the stage name.
template <class Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(name) + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(name) + ": " + e.what());
  }
}

json order_json(const std::optional<int>& k) { return k ? json(*k) : json("auto"); }

json coef_json(const std::vector<Coefficient>& cs) {
  json arr = json::array();
  for (const auto& c : cs) arr.push_back({{"estimate", c.estimate}, {"se", c.se}});
  return arr;
}

json coef_json(const Coefficient& c) { return {{"estimate", c.estimate}, {"se", c.se}}; }

json aic_json(const std::vector<AicEntry>& trace) {
  json arr = json::array();
  for (const auto& e : trace) arr.push_back({{"order", e.order}, {"aic", e.aic}});
  return arr;
}

json errors_json(const LinearFit& fit) {
  return {{"phi", fit.errors.phi}, {"n", fit.n}, {"rss", fit.ols.rss}, {"aic", fit.aic},
          {"groups", fit.errors.sigma_s.rows()}};
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

void RunConfig::validate() const {
  auto odd = [](int s) { return s >= 1 && s % 2 == 1; };
  if (!odd(span) || span < 3) throw ValidationError("span must be an odd integer >= 3");
  for (int s : display_spans) {
    if (!odd(s)) throw ValidationError("display spans must be odd positive integers");
  }
  if (!(mask_fraction >= 0.0 && mask_fraction < 0.5)) throw ValidationError("mask fraction must lie in [0, 0.5)");
  auto in = [](const std::optional<int>& k, int lo) { return !k || (*k >= lo && *k <= 6); };
  if (!in(k1, 0) || !in(k2, 0)) throw ValidationError("K1 and K2 must lie in 0..6");
  if (!in(k3, 1)) throw ValidationError("K3 must lie in 1..6");
  if (smoother.degree != 0 && smoother.degree != 1) throw ValidationError("smoother degree must be 0 or 1");
}

EstimationConfig RunConfig::estimation() const {
  EstimationConfig e;
  e.k1 = k1;
  e.k2 = k2;
  e.k3 = k3;
  e.mask_fraction = mask_fraction;
  e.nonparametric = nonparametric;
  e.smoother = smoother;
  return e;
}

std::string RunConfig::to_json() const {
  json j;
  j["data"] = data.string();
  j["stations"] = stations.string();
  j["spectra"] = spectra.string();
  j["model"] = model.string();
  j["span"] = span;
  j["display_spans"] = display_spans;
  j["mask_fraction"] = mask_fraction;
  j["k1"] = order_json(k1);
  j["k2"] = order_json(k2);
  j["k3"] = order_json(k3);
  j["nonparametric"] = nonparametric;
  j["wind_preprocess"] = wind_preprocess;
  j["per_station_seasonal"] = per_station_seasonal;
  j["origin"] = origin ? json(std::vector<double>{(*origin)(0), (*origin)(1)}) : json(nullptr);
  j["smoother"] = {{"bandwidth", smoother.bandwidth},
                   {"degree", smoother.degree},
                   {"rule", smoother.rule == BandwidthRule::Silverman ? "silverman" : "cv"}};
  j["seed"] = seed;
  j["T"] = T;
  j["n_sites"] = n_sites;
  j["box_km"] = box_km;
  return j.dump(2);
}

Dataset load_dataset(const RunConfig& config) {
  if (config.stations.empty()) throw ValidationError("a station table is required");
  if (config.data.empty()) throw ValidationError("a data file is required");
  return stage("ingest", [&] {
    const auto stations = io::read_stations(config.stations);
    const SiteLayout layout = io::project(stations, config.origin);
    const auto panel = io::align_panel(io::read_panel(config.data, stations.ids), stations.ids);
    Dataset ds;
    ds.layout = layout;
    ds.values = config.wind_preprocess ? io::preprocess_wind(panel, config.per_station_seasonal) : panel.values;
    return ds;
  });
}

CrossSpectraTable spectra_for_fit(const RunConfig& config) {
  if (!config.spectra.empty()) {
    return stage("spectra", [&] {
      CrossSpectraTable t = io::spectra_from_csv(io::read_text(config.spectra));
      if (t.span == 1) return smooth(t, config.span);
      if (t.span != config.span) {
        throw ValidationError("spectra file was smoothed with span " + std::to_string(t.span) +
                              ", configuration asks for " + std::to_string(config.span));
      }
      return t;
    });
  }
  const Dataset ds = load_dataset(config);
  return stage("spectra", [&] {
    const auto raw = raw_cross_spectra(half_fft(center(ds.values)), ds.layout);
    return smooth(raw, config.span);
  });
}

std::string curves_to_csv(const FitReport& r) {
  const auto& c = r.curves;
  const std::vector<std::pair<const char*, const std::vector<double>*>> cols{
      {"k_smoothed", &c.k_smoothed},   {"k_par", &c.k_par},
      {"k_par_lower", &c.k_par_lower}, {"k_par_upper", &c.k_par_upper},
      {"k_np", &c.k_np},               {"gamma_init", &c.gamma_init},
      {"gamma_par", &c.gamma_par},     {"gamma_par_lower", &c.gamma_par_lower},
      {"gamma_par_upper", &c.gamma_par_upper}, {"gamma_np", &c.gamma_np},
      {"slope_p", &c.slope_p},         {"theta_init", &c.theta_init},
      {"theta_par", &c.theta_par},     {"theta_par_lower", &c.theta_par_lower},
      {"theta_par_upper", &c.theta_par_upper}, {"theta_np", &c.theta_np}};
  std::ostringstream out;
  out << "tau";
  for (const auto& [name, v] : cols) out << "," << name;
  out << "\n";
  for (std::size_t f = 0; f < r.freqs.size(); ++f) {
    out << io::format_double(r.freqs[f]);
    for (const auto& [name, v] : cols) {
      out << ",";
      if (f < v->size() && std::isfinite((*v)[f])) out << io::format_double((*v)[f]);
    }
    out << "\n";
  }
  return out.str();
}

std::string residuals_to_csv(const FitReport& r) {
  std::ostringstream out;
  out << "regression,group,freq_index,tau,residual\n";
  auto dump = [&](const char* name, const LinearFit& fit, const std::vector<std::size_t>& groups,
                  const std::vector<std::size_t>& freqs) {
    for (Eigen::Index i = 0; i < fit.ols.residuals.size(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      const std::size_t g = groups.empty() ? 0 : groups[k];
      out << name << "," << g << "," << freqs[k] << "," << io::format_double(r.freqs[freqs[k]]) << ","
          << io::format_double(fit.ols.residuals(i)) << "\n";
    }
  };
  dump("k", r.k.fit, {}, r.k.rows);
  dump("p_gamma", r.pgamma.fit, r.pgamma.row_group, r.pgamma.row_freq);
  dump("theta", r.theta.fit, {}, r.theta.rows);
  return out.str();
}

std::string report_to_json(const FitReport& r, const RunConfig& config) {
  json j;
  j["version"] = kVersion;
  j["T"] = r.T;
  j["n_sites"] = r.n_sites;
  j["n_lag_classes"] = r.n_groups;
  j["span"] = r.span;
  j["display_spans"] = config.display_spans;
  j["mask_fraction"] = config.mask_fraction;
  j["mask_count"] = r.mask_count;
  j["orders"] = {{"k1", r.k.c.size() - 1}, {"k2", r.pgamma.a.size() - 1}, {"k3", r.theta.b.size()}};
  j["k"] = {{"beta", coef_json(r.k.beta)},
            {"c", coef_json(r.k.c)},
            {"aic", aic_json(r.k_aic)},
            {"errors", errors_json(r.k.fit)},
            {"np_bandwidth", r.k_np_bandwidth}};
  j["p_gamma"] = {{"p", coef_json(r.pgamma.p)},
                  {"a", coef_json(r.pgamma.a)},
                  {"aic", aic_json(r.pgamma_aic)},
                  {"errors", errors_json(r.pgamma.fit)},
                  {"candidates", r.pgamma.candidates},
                  {"dropped", r.pgamma.dropped}};
  if (r.pgamma_np) {
    j["p_gamma"]["nonparametric"] = {{"p", coef_json(r.pgamma_np->p)}, {"bandwidth", r.pgamma_np->bandwidth}};
  }
  j["drift"] = {{"v", vec_json(r.drift.v)},
                {"eigenvalue", r.drift.eigenvalue},
                {"frequencies_used", std::count(r.drift.freq_used.begin(), r.drift.freq_used.end(), true)}};
  j["theta"] = {{"b", coef_json(r.theta.b)},
                {"aic", aic_json(r.theta_aic)},
                {"errors", errors_json(r.theta.fit)},
                {"np_bandwidth", r.theta_np_bandwidth}};
  j["model"] = json::parse(io::model_to_json(r.model));
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

FitReport run_fit(const RunConfig& config) {
  config.validate();
  if (config.output.empty()) throw ValidationError("an output directory is required");
  const CrossSpectraTable table = spectra_for_fit(config);
  const FitReport report = stage("estimate", [&] { return estimate_all(table, config.estimation()); });

  json manifest;
  manifest["version"] = kVersion;
  manifest["config"] = json::parse(config.to_json());
  manifest["seed"] = config.seed;
  json hashes = json::object();
  for (const auto* p : {&config.data, &config.stations, &config.spectra}) {
    if (!p->empty()) hashes[p->string()] = io::sha256_file(*p);
  }
  manifest["inputs_sha256"] = hashes;

  const fs::path out = config.output;
  io::atomic_write(out / "spectra.csv", io::spectra_to_csv(table));
  io::atomic_write(out / "curves.csv", curves_to_csv(report));
  io::atomic_write(out / "residuals.csv", residuals_to_csv(report));
  io::atomic_write(out / "report.json", report_to_json(report, config));
  io::atomic_write(out / "manifest.json", manifest.dump(2) + "\n");
  return report;
}

void run_spectra(const RunConfig& config) {
  config.validate();
  if (config.output.empty()) throw ValidationError("an output directory is required");
  const Dataset ds = load_dataset(config);
  const auto raw = stage("spectra", [&] { return raw_cross_spectra(half_fft(center(ds.values)), ds.layout); });
  std::vector<int> spans{1, config.span};
  spans.insert(spans.end(), config.display_spans.begin(), config.display_spans.end());
  std::sort(spans.begin(), spans.end());
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
  for (int s : spans) {
    const auto table = s == 1 ? raw : stage("spectra", [&] { return smooth(raw, s); });
    io::atomic_write(config.output / ("spectra_span" + std::to_string(s) + ".csv"), io::spectra_to_csv(table));
  }
}

SiteLayout random_layout(std::size_t n_sites, double box_km, std::uint64_t seed) {
  if (n_sites < 1) throw ValidationError("need at least one site");
  if (!(box_km > 0.0)) throw ValidationError("box size must be positive");
  std::mt19937_64 rng(seed ^ 0x5EEDBA5EULL);
  std::uniform_real_distribution<double> unif(0.0, box_km);
  std::vector<Eigen::VectorXd> sites;
  for (std::size_t i = 0; i < n_sites; ++i) {
    Eigen::VectorXd s(2);
    s << unif(rng), unif(rng);
    sites.push_back(s);
  }
  return SiteLayout(sites);
}

FieldSample run_simulate(const RunConfig& config) {
  if (config.model.empty()) throw ValidationError("a model JSON file is required");
  if (config.output.empty()) throw ValidationError("an output file is required");
  const SteinModel model = stage("model", [&] { return io::read_model(config.model); });
  const bool have_stations = !config.stations.empty();
  const SiteLayout layout = stage("layout", [&] {
    return have_stations ? io::project(io::read_stations(config.stations), config.origin)
                         : random_layout(config.n_sites, config.box_km, config.seed);
  });
  const FieldSample sample = stage("simulate", [&] { return sample_field(model, layout, config.T, config.seed); });
  io::atomic_write(config.output, io::sample_to_csv(sample));
  if (!have_stations) {
    std::ostringstream st;
    st << "id,x_km,y_km\n";
    for (std::size_t i = 0; i < layout.size(); ++i) {
      st << layout.ids()[i] << "," << io::format_double(layout.site(i)(0)) << ","
         << io::format_double(layout.site(i)(1)) << "\n";
    }
    fs::path stations = config.output;
    stations.replace_extension("");
    stations += "_stations.csv";
    io::atomic_write(stations, st.str());
  }
  return sample;
}

std::string render_report(const std::string& report_json) {
  json j;
  try {
    j = json::parse(report_json);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report JSON: ") + e.what());
  }
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  try {
    auto coef = [&](const json& c) {
      std::ostringstream s;
      s.setf(std::ios::fixed);
      s.precision(4);
      s << c.at("estimate").get<double>() << " (" << c.at("se").get<double>() << ")";
      return s.str();
    };
    auto list = [&](const char* name, const json& cs, int first) {
      for (std::size_t k = 0; k < cs.size(); ++k) {
        out << "  " << name << "_" << (static_cast<int>(k) + first) << " = " << coef(cs[k]) << "\n";
      }
    };
    auto trace = [&](const json& t) {
      if (t.empty()) return;
      out << "  AIC:";
      for (const auto& e : t) out << " [" << e.at("order").get<int>() << "] " << e.at("aic").get<double>();
      out << "\n";
    };
    out << "T = " << j.at("T").get<long>() << ", sites = " << j.at("n_sites").get<long>()
        << ", lag classes = " << j.at("n_lag_classes").get<long>() << ", span = " << j.at("span").get<int>()
        << ", masked frequencies = " << j.at("mask_count").get<long>() << "\n";
    out << "temporal spectrum k (K1 = " << j.at("orders").at("k1").get<int>() << ")\n";
    out << "  beta = " << coef(j.at("k").at("beta")) << "\n";
    list("c", j.at("k").at("c"), 0);
    trace(j.at("k").at("aic"));
    out << "coherence decay (K2 = " << j.at("orders").at("k2").get<int>() << ")\n";
    out << "  p = " << coef(j.at("p_gamma").at("p")) << "\n";
    list("a", j.at("p_gamma").at("a"), 0);
    trace(j.at("p_gamma").at("aic"));
    if (j.at("p_gamma").contains("nonparametric")) {
      out << "  p (nonparametric) = " << coef(j.at("p_gamma").at("nonparametric").at("p")) << "\n";
    }
    out << "drift v = (";
    const auto v = j.at("drift").at("v").get<std::vector<double>>();
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
    out << ")\n";
    out << "phase theta (K3 = " << j.at("orders").at("k3").get<int>() << ")\n";
    list("b", j.at("theta").at("b"), 1);
    trace(j.at("theta").at("aic"));
    const auto& warnings = j.at("warnings");
    if (!warnings.empty()) {
      out << "warnings:\n";
      for (const auto& w : warnings) out << "  " << w.get<std::string>() << "\n";
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report JSON: ") + e.what());
  }
  return out.str();
}

}  // namespace covspec
