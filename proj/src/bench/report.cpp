#include "stitch/bench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "stitch/error.hpp"

namespace stitch::bench {

using nlohmann::json;

MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

namespace {

std::optional<MeanStd> present_mean_std(const std::vector<SeedResult>& seeds,
                                        std::optional<double> SeedResult::*field) {
  std::vector<double> xs;
  for (const SeedResult& s : seeds)
    if (s.*field) xs.push_back(*(s.*field));
  if (xs.empty()) return std::nullopt;
  return mean_std(xs);
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

std::string join_params(const std::vector<std::pair<std::string, std::string>>& ps) {
  std::string s;
  for (const auto& [k, v] : ps) s += (s.empty() ? "" : ";") + k + "=" + v;
  return s;
}

std::vector<std::pair<std::string, std::string>> split_params(const std::string& s) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw FormatError("report csv: bad parameter '" + item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json mean_std_json(const std::optional<MeanStd>& m) {
  if (!m) return nullptr;
  return {{"mean", m->mean}, {"std", m->std}};
}

}  // namespace

MeanStd ReportRow::success() const {
  std::vector<double> xs;
  for (const SeedResult& s : seeds) xs.push_back(s.success_rate());
  return mean_std(xs);
}

std::optional<MeanStd> ReportRow::length_mm() const { return present_mean_std(seeds, &SeedResult::length_mm); }

std::optional<MeanStd> ReportRow::steps() const { return present_mean_std(seeds, &SeedResult::steps); }

std::vector<SeedResult> seed_results(const std::vector<EpisodeOutcome>& outcomes) {
  std::vector<SeedResult> out;
  std::map<std::uint64_t, std::size_t> index;
  std::vector<double> len_sum, step_sum;
  for (const EpisodeOutcome& o : outcomes) {
    auto [it, fresh] = index.emplace(o.seed, out.size());
    if (fresh) {
      out.push_back({o.seed, 0, 0, std::nullopt, std::nullopt});
      len_sum.push_back(0.0);
      step_sum.push_back(0.0);
    }
    const std::size_t k = it->second;
    ++out[k].episodes;
    if (o.success) {
      ++out[k].successes;
      len_sum[k] += o.length_mm;
      step_sum[k] += o.steps;
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k].successes == 0) continue;
    out[k].length_mm = len_sum[k] / out[k].successes;
    out[k].steps = step_sum[k] / out[k].successes;
  }
  return out;
}

ReportFormat report_format_from_string(std::string_view s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  if (s == "md" || s == "markdown") return ReportFormat::Markdown;
  throw ConfigError("unknown report format '" + std::string(s) + "' (csv, json, md)");
}

std::string_view extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Json: return "json";
    case ReportFormat::Markdown: return "md";
  }
  return "txt";
}

json payload_json(const RunReport& r) {
  json rows = json::array();
  for (const ReportRow& row : r.rows) {
    json params = json::array();
    for (const auto& [k, v] : row.params) params.push_back({k, v});
    json seeds = json::array();
    for (const SeedResult& s : row.seeds)
      seeds.push_back({{"seed", s.seed},
                       {"episodes", s.episodes},
                       {"successes", s.successes},
                       {"length_mm", opt_json(s.length_mm)},
                       {"steps", opt_json(s.steps)}});
    rows.push_back({{"label", row.label},
                    {"params", params},
                    {"success", mean_std_json(row.success())},
                    {"length_mm", mean_std_json(row.length_mm())},
                    {"steps", mean_std_json(row.steps())},
                    {"seeds", seeds}});
  }
  return {{"format", "stitch-report"},
          {"version", RunReport::kVersion},
          {"command", r.command},
          {"fingerprint", hex(r.fingerprint)},
          {"rows", rows}};
}

json to_json(const RunReport& r) {
  json j = payload_json(r);
  j["timing"] = {{"wall_time_s", r.wall_time_s}, {"env_steps", r.env_steps}, {"steps_per_s", r.steps_per_s}};
  return j;
}

RunReport report_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "stitch-report") throw FormatError("report: unknown format");
    if (j.at("version").get<int>() != RunReport::kVersion) throw FormatError("report: unsupported version");
    RunReport r;
    r.command = j.at("command").get<std::string>();
    r.fingerprint = std::stoull(j.at("fingerprint").get<std::string>(), nullptr, 16);
    for (const json& row : j.at("rows")) {
      ReportRow out;
      out.label = row.at("label").get<std::string>();
      for (const json& p : row.at("params")) out.params.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      for (const json& s : row.at("seeds"))
        out.seeds.push_back({s.at("seed").get<std::uint64_t>(), s.at("episodes").get<int>(),
                             s.at("successes").get<int>(), opt_from(s.at("length_mm")), opt_from(s.at("steps"))});
      r.rows.push_back(std::move(out));
    }
    if (j.contains("timing")) {
      const json& t = j.at("timing");
      r.wall_time_s = t.at("wall_time_s").get<double>();
      r.env_steps = t.at("env_steps").get<std::int64_t>();
      r.steps_per_s = t.at("steps_per_s").get<double>();
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

std::string format_cell(const std::optional<MeanStd>& m) {
  if (!m) return "/";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", m->mean, m->std);
  return buf;
}

void emit_report(std::ostream& out, const RunReport& r, ReportFormat f) {
  switch (f) {
    case ReportFormat::Json: out << to_json(r).dump(2) << '\n'; return;
    case ReportFormat::Csv: {
      out << "# stitch-report v" << RunReport::kVersion << '\n'
          << "# command=" << r.command << '\n'
          << "# fingerprint=" << hex(r.fingerprint) << '\n'
          << "# wall_time_s=" << num(r.wall_time_s) << '\n'
          << "# env_steps=" << r.env_steps << '\n'
          << "# steps_per_s=" << num(r.steps_per_s) << '\n'
          << "row,label,params,seed,episodes,successes,length_mm,steps\n";
      for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const ReportRow& row = r.rows[i];
        for (const SeedResult& s : row.seeds)
          out << i << ',' << csv_quote(row.label) << ',' << csv_quote(join_params(row.params)) << ',' << s.seed
              << ',' << s.episodes << ',' << s.successes << ',' << (s.length_mm ? num(*s.length_mm) : "") << ','
              << (s.steps ? num(*s.steps) : "") << '\n';
      }
      return;
    }
    case ReportFormat::Markdown: {
      std::vector<std::string> keys;
      for (const ReportRow& row : r.rows)
        for (const auto& [k, v] : row.params)
          if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
      out << "| configuration |";
      for (const auto& k : keys) out << ' ' << k << " |";
      out << " success rate | trajectory length (mm) | time steps |\n|---|";
      for (std::size_t i = 0; i < keys.size(); ++i) out << "---|";
      out << "---|---|---|\n";
      for (const ReportRow& row : r.rows) {
        out << "| " << row.label << " |";
        for (const auto& k : keys) {
          std::string v = "";
          for (const auto& [pk, pv] : row.params)
            if (pk == k) v = pv;
          out << ' ' << v << " |";
        }
        out << ' ' << format_cell(row.success()) << " | " << format_cell(row.length_mm()) << " | "
            << format_cell(row.steps()) << " |\n";
      }
      char buf[128];
      std::snprintf(buf, sizeof buf, "%.1f s wall time, %.0f env steps/s", r.wall_time_s, r.steps_per_s);
      out << "\nCommand `" << r.command << "`, scenario fingerprint `" << hex(r.fingerprint) << "`, " << buf
          << ".\n";
      return;
    }
  }
}

RunReport read_report_csv(std::istream& in) {
  RunReport r;
  std::string line;
  std::map<std::string, std::string> meta;
  bool header_seen = false;
  std::size_t current_row = static_cast<std::size_t>(-1);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) meta[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!header_seen) {
      if (line != "row,label,params,seed,episodes,successes,length_mm,steps")
        throw FormatError("report csv: unexpected column header");
      header_seen = true;
      continue;
    }
    const auto f = csv_split(line);
    if (f.size() != 8) throw FormatError("report csv: expected 8 fields in '" + line + "'");
    try {
      const std::size_t row = std::stoul(f[0]);
      if (row != current_row) {
        if (row != r.rows.size()) throw FormatError("report csv: rows out of order");
        r.rows.push_back({f[1], split_params(f[2]), {}});
        current_row = row;
      }
      r.rows.back().seeds.push_back({std::stoull(f[3]), std::stoi(f[4]), std::stoi(f[5]),
                                     f[6].empty() ? std::nullopt : std::optional<double>(std::stod(f[6])),
                                     f[7].empty() ? std::nullopt : std::optional<double>(std::stod(f[7]))});
    } catch (const std::logic_error&) {
      throw FormatError("report csv: bad number in '" + line + "'");
    }
  }
  if (!header_seen) throw FormatError("report csv: missing column header");
  try {
    r.command = meta.at("command");
    r.fingerprint = std::stoull(meta.at("fingerprint"), nullptr, 16);
    r.wall_time_s = std::stod(meta.at("wall_time_s"));
    r.env_steps = std::stoll(meta.at("env_steps"));
    r.steps_per_s = std::stod(meta.at("steps_per_s"));
  } catch (const std::exception&) {
    throw FormatError("report csv: missing or bad metadata line");
  }
  return r;
}

}  // namespace stitch::bench
