#include "covspec/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "covspec/error.hpp"
#include "json.hpp"

namespace covspec::io {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::optional<double> to_double(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return x;
}

double require_double(const std::string& text, const std::string& what) {
  const auto x = to_double(text);
  if (!x || !std::isfinite(*x)) throw ValidationError("cannot parse " + what + " from '" + text + "'");
  return *x;
}

// Non-empty, non-comment lines.
std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.push_back(t);
  }
  return out;
}

char detect_delimiter(const std::string& line) { return line.find(',') != std::string::npos ? ',' : ' '; }

int find_column(const std::vector<std::string>& header, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (lower(header[c]) == name) return static_cast<int>(c);
    }
  }
  return -1;
}

void check_width(const std::vector<std::string>& fields, std::size_t width, std::size_t line_no) {
  if (fields.size() != width) {
    std::ostringstream msg;
    msg << "line " << line_no << ": expected " << width << " fields, found " << fields.size();
    throw ValidationError(msg.str());
  }
}

bool is_missing(const std::string& cell) {
  const std::string t = lower(trim(cell));
  return t.empty() || t == "na" || t == "nan";
}

int parse_year(const std::string& text) {
  const int y = static_cast<int>(require_double(text, "year"));
  return y < 100 ? y + 1900 : y;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool have = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
      have = true;
      continue;
    }
    const bool sep = !quoted && (delimiter == ' ' ? std::isspace(static_cast<unsigned char>(ch)) != 0 : ch == delimiter);
    if (sep) {
      if (delimiter != ' ' || have) out.push_back(delimiter == ' ' ? cur : trim(cur));
      cur.clear();
      have = false;
    } else {
      cur.push_back(ch);
      have = true;
    }
  }
  if (delimiter != ' ' || have) out.push_back(delimiter == ' ' ? cur : trim(cur));
  return out;
}

std::string format_double(double x) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return buf.data();
}

// ---------------------------------------------------------------------------
// Models

std::string model_to_json(const SteinModel& model) {
  json j;
  j["beta"] = model.spectrum.beta;
  j["c"] = model.spectrum.cosine_part.coefficients();
  j["a"] = model.log_gamma.coefficients();
  j["b"] = model.theta.coefficients();
  j["v"] = std::vector<double>(model.drift.data(), model.drift.data() + model.drift.size());
  j["p"] = model.power;
  return j.dump(2) + "\n";
}

SteinModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model JSON: ") + e.what());
  }
  SteinModel m;
  try {
    m.spectrum.beta = j.at("beta").get<double>();
    m.spectrum.cosine_part = EvenTrigPoly(j.at("c").get<std::vector<double>>());
    m.log_gamma = EvenTrigPoly(j.at("a").get<std::vector<double>>());
    m.theta = OddTrigPoly(j.at("b").get<std::vector<double>>());
    const auto v = j.at("v").get<std::vector<double>>();
    m.drift = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    m.power = j.at("p").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model JSON: ") + e.what());
  }
  m.validate();
  return m;
}

SteinModel read_model(const fs::path& path) { return model_from_json(read_text(path)); }

// ---------------------------------------------------------------------------
// Stations

double parse_coordinate(const std::string& text) {
  const std::string t = trim(text);
  if (const auto x = to_double(t)) {
    if (!std::isfinite(*x)) throw ValidationError("non-finite coordinate '" + text + "'");
    return *x;
  }
  // degrees 'd' minutes ['] [seconds "] hemisphere
  const auto dpos = t.find_first_of("d\xB0");
  if (dpos == std::string::npos || t.empty()) throw ValidationError("cannot parse coordinate '" + text + "'");
  const char hemi = static_cast<char>(std::toupper(static_cast<unsigned char>(t.back())));
  if (hemi != 'N' && hemi != 'S' && hemi != 'E' && hemi != 'W') {
    throw ValidationError("coordinate '" + text + "' lacks a hemisphere letter");
  }
  const double deg = require_double(t.substr(0, dpos), "degrees");
  std::string rest = t.substr(dpos + 1, t.size() - dpos - 2);
  double minutes = 0.0;
  double seconds = 0.0;
  const auto mpos = rest.find('\'');
  if (mpos != std::string::npos) {
    minutes = require_double(rest.substr(0, mpos), "minutes");
    rest = rest.substr(mpos + 1);
    const auto spos = rest.find('"');
    if (spos != std::string::npos) seconds = require_double(rest.substr(0, spos), "seconds");
  } else if (!trim(rest).empty()) {
    minutes = require_double(rest, "minutes");
  }
  const double value = deg + minutes / 60.0 + seconds / 3600.0;
  return (hemi == 'S' || hemi == 'W') ? -value : value;
}

StationTable read_stations(const fs::path& path) {
  const auto lines = data_lines(read_text(path));
  if (lines.size() < 2) throw ValidationError("stations file " + path.string() + " has no rows");
  const char delim = detect_delimiter(lines.front());
  const auto header = split_fields(lines.front(), delim);
  const int id_col = find_column(header, {"id", "station_id", "code", "station"});
  const int lon_col = find_column(header, {"lon", "longitude", "long"});
  const int lat_col = find_column(header, {"lat", "latitude"});
  const int x_col = find_column(header, {"x_km", "x"});
  const int y_col = find_column(header, {"y_km", "y"});
  if (id_col < 0) throw ValidationError("stations file lacks an id column");
  StationTable st;
  int c0 = -1;
  int c1 = -1;
  if (lon_col >= 0 && lat_col >= 0) {
    st.geographic = true;
    c0 = lon_col;
    c1 = lat_col;
  } else if (x_col >= 0 && y_col >= 0) {
    st.geographic = false;
    c0 = x_col;
    c1 = y_col;
  } else {
    throw ValidationError("stations file needs lon/lat or x_km/y_km columns");
  }
  st.coords.resize(static_cast<Eigen::Index>(lines.size() - 1), 2);
  std::set<std::string> seen;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r], delim);
    check_width(fields, header.size(), r + 1);
    const std::string id = trim(fields[static_cast<std::size_t>(id_col)]);
    if (!seen.insert(id).second) throw ValidationError("duplicate station id '" + id + "'");
    st.ids.push_back(id);
    const auto row = static_cast<Eigen::Index>(r - 1);
    st.coords(row, 0) = parse_coordinate(fields[static_cast<std::size_t>(c0)]);
    st.coords(row, 1) = parse_coordinate(fields[static_cast<std::size_t>(c1)]);
  }
  return st;
}

SiteLayout project(const StationTable& stations, std::optional<Eigen::Vector2d> origin) {
  std::vector<Eigen::VectorXd> sites;
  if (!stations.geographic) {
    for (Eigen::Index i = 0; i < stations.coords.rows(); ++i) sites.push_back(stations.coords.row(i).transpose());
    return SiteLayout(sites, stations.ids);
  }
  constexpr double R = 6371.0;
  constexpr double rad = std::numbers::pi / 180.0;
  const Eigen::Vector2d o = origin ? *origin : Eigen::Vector2d(stations.coords.colwise().mean().transpose());
  const double coslat = std::cos(o(1) * rad);
  for (Eigen::Index i = 0; i < stations.coords.rows(); ++i) {
    Eigen::VectorXd s(2);
    s(0) = R * (stations.coords(i, 0) - o(0)) * rad * coslat;
    s(1) = R * (stations.coords(i, 1) - o(1)) * rad;
    sites.push_back(s);
  }
  return SiteLayout(sites, stations.ids);
}

// ---------------------------------------------------------------------------
// Panels

std::string Date::str() const {
  std::array<char, 16> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02d-%02d", year, month, day);
  return buf.data();
}

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int month_length(int y, int m) {
  static constexpr std::array<int, 12> len{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return (m == 2 && leap(y)) ? 29 : len[static_cast<std::size_t>(m - 1)];
}

Date make_date(int y, int m, int d) {
  if (m < 1 || m > 12 || d < 1 || d > month_length(y, m)) {
    std::ostringstream msg;
    msg << "invalid date " << y << "-" << m << "-" << d;
    throw ValidationError(msg.str());
  }
  return {y, m, d};
}

struct TimeKey {
  std::optional<Date> date;
  long index = 0;
  auto operator<=>(const TimeKey&) const = default;
  std::string str() const { return date ? date->str() : "t=" + std::to_string(index); }
};

Panel assemble(const std::vector<std::string>& ids, const std::map<TimeKey, std::map<std::string, double>>& cells,
               bool dated) {
  Panel panel;
  panel.station_ids = ids;
  panel.values.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(cells.size()));
  std::vector<std::string> missing;
  std::size_t n_missing = 0;
  Eigen::Index t = 0;
  for (const auto& [key, row] : cells) {
    if (dated) panel.dates.push_back(*key.date);
    for (std::size_t s = 0; s < ids.size(); ++s) {
      const auto it = row.find(ids[s]);
      if (it == row.end()) {
        if (missing.size() < 10) missing.push_back("(" + ids[s] + ", " + key.str() + ")");
        ++n_missing;
        continue;
      }
      panel.values(static_cast<Eigen::Index>(s), t) = it->second;
    }
    ++t;
  }
  if (n_missing > 0) {
    std::ostringstream msg;
    msg << n_missing << " missing cell(s) in panel:";
    for (const auto& m : missing) msg << " " << m;
    if (n_missing > missing.size()) msg << " ...";
    throw ValidationError(msg.str());
  }
  return panel;
}

}  // namespace

Date parse_date(const std::string& text) {
  const std::string t = trim(text);
  int y = 0, m = 0, d = 0;
  char a = 0, b = 0;
  std::istringstream in(t);
  if (!(in >> y >> a >> m >> b >> d) || a != '-' || b != '-' || in.peek() != EOF) {
    throw ValidationError("cannot parse date '" + text + "' (expected YYYY-MM-DD)");
  }
  return make_date(y, m, d);
}

int day_of_year(const Date& date) {
  int doy = 0;
  for (int m = 1; m < date.month; ++m) doy += month_length(1999, m);
  const int day = (date.month == 2 && date.day == 29) ? 28 : date.day;
  return doy + day - 1;
}

Panel read_panel(const fs::path& path, const std::vector<std::string>& fallback_ids) {
  const auto lines = data_lines(read_text(path));
  if (lines.empty()) throw ValidationError("data file " + path.string() + " is empty");
  const char delim = detect_delimiter(lines.front());
  const auto first = split_fields(lines.front(), delim);
  const bool has_header = !to_double(first.front()).has_value();

  std::map<TimeKey, std::map<std::string, double>> cells;
  auto put = [&](const TimeKey& key, const std::string& id, const std::string& cell, std::size_t line_no) {
    if (is_missing(cell)) return;
    const auto x = to_double(cell);
    if (!x || !std::isfinite(*x)) {
      throw ValidationError("line " + std::to_string(line_no) + ": bad value '" + cell + "' for " + id);
    }
    if (!cells[key].emplace(id, *x).second) {
      throw ValidationError("duplicate observation for (" + id + ", " + key.str() + ")");
    }
  };

  if (!has_header) {
    if (fallback_ids.empty()) throw ValidationError("headerless data file needs station ids from the stations file");
    const std::size_t width = 3 + fallback_ids.size();
    for (std::size_t r = 0; r < lines.size(); ++r) {
      const auto f = split_fields(lines[r], delim);
      check_width(f, width, r + 1);
      const Date d = make_date(parse_year(f[0]), static_cast<int>(require_double(f[1], "month")),
                               static_cast<int>(require_double(f[2], "day")));
      const TimeKey key{d, 0};
      cells[key];
      for (std::size_t s = 0; s < fallback_ids.size(); ++s) put(key, fallback_ids[s], f[3 + s], r + 1);
    }
    return assemble(fallback_ids, cells, true);
  }

  const int sid = find_column(first, {"station_id", "station", "site_id", "id"});
  const int val = find_column(first, {"value"});
  const int date_col = find_column(first, {"date"});
  const int t_col = find_column(first, {"t", "time"});
  const int y_col = find_column(first, {"year", "yr"});
  const int m_col = find_column(first, {"month", "mo"});
  const int d_col = find_column(first, {"day", "dy"});
  const bool ymd = y_col >= 0 && m_col >= 0 && d_col >= 0;

  auto key_of = [&](const std::vector<std::string>& f) -> TimeKey {
    if (date_col >= 0) return {parse_date(f[static_cast<std::size_t>(date_col)]), 0};
    if (ymd) {
      return {make_date(parse_year(f[static_cast<std::size_t>(y_col)]),
                        static_cast<int>(require_double(f[static_cast<std::size_t>(m_col)], "month")),
                        static_cast<int>(require_double(f[static_cast<std::size_t>(d_col)], "day"))),
              0};
    }
    return {std::nullopt, static_cast<long>(require_double(f[static_cast<std::size_t>(t_col)], "time index"))};
  };
  if (date_col < 0 && !ymd && t_col < 0) throw ValidationError("data file needs a date, year/month/day or t column");
  const bool dated = date_col >= 0 || ymd;

  if (sid >= 0 && val >= 0) {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (std::size_t r = 1; r < lines.size(); ++r) {
      const auto f = split_fields(lines[r], delim);
      check_width(f, first.size(), r + 1);
      const std::string id = trim(f[static_cast<std::size_t>(sid)]);
      if (seen.insert(id).second) ids.push_back(id);
      const TimeKey key = key_of(f);
      cells[key];
      put(key, id, f[static_cast<std::size_t>(val)], r + 1);
    }
    return assemble(ids, cells, dated);
  }

  std::vector<std::size_t> station_cols;
  std::vector<std::string> ids;
  for (std::size_t c = 0; c < first.size(); ++c) {
    const auto ci = static_cast<int>(c);
    if (ci == date_col || ci == t_col || ci == y_col || ci == m_col || ci == d_col) continue;
    station_cols.push_back(c);
    ids.push_back(trim(first[c]));
  }
  if (ids.empty()) throw ValidationError("wide data file has no station columns");
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = split_fields(lines[r], delim);
    check_width(f, first.size(), r + 1);
    const TimeKey key = key_of(f);
    if (cells.count(key)) throw ValidationError("duplicate time " + key.str() + " in wide data file");
    cells[key];
    for (std::size_t s = 0; s < ids.size(); ++s) put(key, ids[s], f[station_cols[s]], r + 1);
  }
  return assemble(ids, cells, dated);
}

Panel align_panel(const Panel& panel, const std::vector<std::string>& station_ids) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < station_ids.size(); ++i) pos[station_ids[i]] = i;
  std::vector<std::string> unknown;
  for (const auto& id : panel.station_ids) {
    if (!pos.count(id)) unknown.push_back(id);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown station id(s) in data:";
    for (const auto& u : unknown) msg += " " + u;
    throw ValidationError(msg);
  }
  if (panel.station_ids.size() != station_ids.size()) {
    std::set<std::string> have(panel.station_ids.begin(), panel.station_ids.end());
    std::string msg = "stations without data:";
    for (const auto& id : station_ids) {
      if (!have.count(id)) msg += " " + id;
    }
    throw ValidationError(msg);
  }
  Panel out;
  out.station_ids = station_ids;
  out.dates = panel.dates;
  out.values.resize(panel.values.rows(), panel.values.cols());
  for (std::size_t i = 0; i < panel.station_ids.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(pos[panel.station_ids[i]])) = panel.values.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

Eigen::MatrixXd preprocess_wind(const Panel& panel, bool per_station) {
  const auto S = panel.values.rows();
  const auto T = panel.values.cols();
  if (static_cast<Eigen::Index>(panel.dates.size()) != T) throw ValidationError("preprocessing needs calendar dates");
  if ((panel.values.array() < 0.0).any()) throw ValidationError("preprocessing needs nonnegative values");
  Eigen::MatrixXd y = panel.values.cwiseSqrt();
  constexpr int kDays = 365;
  std::vector<int> doy(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) doy[static_cast<std::size_t>(t)] = day_of_year(panel.dates[static_cast<std::size_t>(t)]);
  const Eigen::Index rows = per_station ? S : 1;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(rows, kDays);
  Eigen::MatrixXd cnt = Eigen::MatrixXd::Zero(rows, kDays);
  for (Eigen::Index s = 0; s < S; ++s) {
    const Eigen::Index r = per_station ? s : 0;
    for (Eigen::Index t = 0; t < T; ++t) {
      sum(r, doy[static_cast<std::size_t>(t)]) += y(s, t);
      cnt(r, doy[static_cast<std::size_t>(t)]) += 1.0;
    }
  }
  for (Eigen::Index s = 0; s < S; ++s) {
    const Eigen::Index r = per_station ? s : 0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const int d = doy[static_cast<std::size_t>(t)];
      y(s, t) -= sum(r, d) / cnt(r, d);
    }
  }
  return center(y);
}

// ---------------------------------------------------------------------------

std::string sample_to_csv(const FieldSample& sample) {
  std::ostringstream out;
  out << "# seed=" << sample.seed << "\n";
  out << "site_id,t,value\n";
  const auto& ids = sample.layout.ids();
  for (Eigen::Index s = 0; s < sample.values.rows(); ++s) {
    for (Eigen::Index t = 0; t < sample.values.cols(); ++t) {
      out << ids[static_cast<std::size_t>(s)] << "," << t << "," << format_double(sample.values(s, t)) << "\n";
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Spectra tables

namespace {

const std::array<const char*, 3> kLagNames{"lag_x_km", "lag_y_km", "lag_z_km"};

}  // namespace

std::string spectra_to_csv(const CrossSpectraTable& table) {
  const std::size_t S = table.n_sites();
  const std::size_t F = table.n_freqs();
  const int d = table.pairs.empty() ? 2 : static_cast<int>(table.pairs.front().lag.size());
  if (d < 1 || d > 3) throw ValidationError("spectra CSV supports 1 to 3 spatial dimensions");
  std::ostringstream out;
  out << "# T=" << table.T << "\n# span=" << table.span << "\n# sites=" << S << "\n# dim=" << d << "\n";
  out << "pair_id";
  for (int k = 0; k < d; ++k) out << "," << kLagNames[static_cast<std::size_t>(k)];
  out << ",tau,re,im,modulus,angle,unwound\n";
  auto row = [&](std::size_t i, std::size_t j, const Eigen::VectorXd& lag, std::size_t f, Complex value, double mod,
                 double ang, double unw) {
    out << i << "-" << j;
    for (int k = 0; k < d; ++k) out << "," << format_double(lag(k));
    out << "," << format_double(table.freqs[f]) << "," << format_double(value.real()) << ","
        << format_double(value.imag()) << "," << format_double(mod) << "," << format_double(ang) << ","
        << format_double(unw) << "\n";
  };
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < S; ++i) {
    for (std::size_t f = 0; f < F; ++f) {
      row(i, i, zero, f, table.autos(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)), 1.0, 0.0, 0.0);
    }
  }
  for (std::size_t p = 0; p < table.pairs.size(); ++p) {
    const auto& pair = table.pairs[p];
    std::vector<double> angles(F);
    std::vector<double> mods(F);
    for (std::size_t f = 0; f < F; ++f) {
      const Complex c = table.coherence(pair.i, pair.j, f);
      mods[f] = std::abs(c);
      angles[f] = std::arg(c);
    }
    const auto unwound = unwind(angles);
    for (std::size_t f = 0; f < F; ++f) {
      row(pair.i, pair.j, pair.lag, f, table.cross(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(f)),
          mods[f], angles[f], unwound[f]);
    }
  }
  return out.str();
}

CrossSpectraTable spectra_from_csv(const std::string& text) {
  std::map<std::string, long> meta;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const std::string t = trim(line);
      if (t.empty() || t.front() != '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) continue;
      meta[trim(t.substr(1, eq - 1))] = static_cast<long>(require_double(t.substr(eq + 1), "spectra metadata"));
    }
  }
  for (const char* key : {"T", "span", "sites", "dim"}) {
    if (!meta.count(key)) throw ValidationError(std::string("spectra CSV lacks '# ") + key + "=' metadata");
  }
  const auto S = static_cast<std::size_t>(meta["sites"]);
  const int d = static_cast<int>(meta["dim"]);
  const auto lines = data_lines(text);
  if (lines.empty()) throw ValidationError("spectra CSV has no header");
  const auto header = split_fields(lines.front(), ',');
  const std::size_t width = static_cast<std::size_t>(d) + 7;
  check_width(header, width, 1);

  CrossSpectraTable table;
  table.T = static_cast<std::size_t>(meta["T"]);
  table.span = static_cast<int>(meta["span"]);
  table.freqs = fourier_grid(table.T);
  const std::size_t F = table.freqs.size();
  table.autos = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(F),
                                          std::numeric_limits<double>::quiet_NaN());
  const std::size_t P = S * (S - 1) / 2;
  table.cross.resize(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(F));
  table.pairs.resize(P);
  std::vector<std::size_t> filled(P + S, 0);

  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = split_fields(lines[r], ',');
    check_width(f, width, r + 1);
    const auto dash = f[0].find('-');
    if (dash == std::string::npos) throw ValidationError("bad pair id '" + f[0] + "'");
    const auto i = static_cast<std::size_t>(require_double(f[0].substr(0, dash), "pair id"));
    const auto j = static_cast<std::size_t>(require_double(f[0].substr(dash + 1), "pair id"));
    if (i >= S || j >= S || i > j) throw ValidationError("pair id '" + f[0] + "' out of range");
    Eigen::VectorXd lag(d);
    for (int k = 0; k < d; ++k) lag(k) = require_double(f[1 + static_cast<std::size_t>(k)], "lag");
    const double tau = require_double(f[static_cast<std::size_t>(d) + 1], "tau");
    const double re = require_double(f[static_cast<std::size_t>(d) + 2], "re");
    const double im = require_double(f[static_cast<std::size_t>(d) + 3], "im");
    const auto fi = static_cast<std::size_t>(std::llround(tau * static_cast<double>(table.T))) - 1;
    if (fi >= F || table.freqs[fi] != tau) throw ValidationError("frequency " + f[static_cast<std::size_t>(d) + 1] + " is off the grid");
    if (i == j) {
      table.autos(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(fi)) = re;
      ++filled[P + i];
    } else {
      const std::size_t p = table.pair_index(i, j);
      table.pairs[p] = SitePair{i, j, lag};
      table.cross(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(fi)) = Complex(re, im);
      ++filled[p];
    }
  }
  for (std::size_t k = 0; k < filled.size(); ++k) {
    if (filled[k] != F) throw ValidationError("spectra CSV is incomplete: a pair lacks some frequencies");
  }
  return table;
}

}  // namespace covspec::io
