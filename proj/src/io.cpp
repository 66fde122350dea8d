#include "symstream/io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "symstream/timbre.hpp"

namespace symstream {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(path + ":" + std::to_string(line) + ": expected a number, got '" + s + "'");
  }
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_onsets_csv(const std::string& path, const std::vector<double>& onsets) {
  auto out = open_out(path);
  out << "time_seconds\n";
  for (double t : onsets) out << fixed6(t) << '\n';
}

std::vector<double> read_onsets_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<double> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    line = trim(line);
    if (line.empty() || (n == 1 && line == "time_seconds")) continue;
    out.push_back(parse_double(line, path, n));
  }
  return out;
}

std::vector<Annotation> read_annotations(const std::string& path) {
  auto in = open_in(path);
  std::vector<Annotation> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InvalidArgument(path + ":" + std::to_string(n) + ": expected time_seconds,label");
    const std::string time = trim(line.substr(0, comma));
    if (n == 1 && time == "time_seconds") continue;
    out.push_back({parse_double(time, path, n), trim(line.substr(comma + 1))});
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (!(out[i].time > out[i - 1].time)) throw InvalidArgument(path + ": annotation times must be increasing");
  }
  return out;
}

void write_annotations(const std::string& path, const std::vector<Annotation>& annotations) {
  auto out = open_out(path);
  out << "time_seconds,label\n";
  for (const auto& a : annotations) out << fixed6(a.time) << ',' << a.label << '\n';
}

std::vector<int> read_sequence(const std::string& path) {
  auto in = open_in(path);
  std::vector<int> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    line = trim(line);
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(line, &used));
      if (used != line.size()) throw std::invalid_argument(line);
    } catch (const std::exception&) {
      throw InvalidArgument(path + ":" + std::to_string(n) + ": expected an integer, got '" + line + "'");
    }
  }
  return out;
}

void write_sequence(const std::string& path, const std::vector<int>& seq) {
  auto out = open_out(path);
  for (int s : seq) out << s << '\n';
}

void write_descriptors_csv(const std::string& path, const std::vector<double>& times,
                           const std::vector<VectorX<double>>& rows) {
  if (times.size() != rows.size()) throw InvalidArgument("write_descriptors_csv: size mismatch");
  auto out = open_out(path);
  out << "time_seconds";
  for (const auto& name : timbre_column_names()) out << ',' << name;
  out << '\n';
  out.precision(10);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << fixed6(times[i]);
    for (Index d = 0; d < rows[i].size(); ++d) out << ',' << rows[i](d);
    out << '\n';
  }
}

void write_json(const std::string& path, const nlohmann::json& value) {
  auto out = open_out(path);
  out << value.dump(2) << '\n';
}

void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& rows) {
  auto out = open_out(path);
  for (const auto& r : rows) out << r.dump() << '\n';
}

std::vector<int> encode_labels(const std::vector<Annotation>& annotations) {
  std::map<std::string, int> ids;
  std::vector<int> out;
  for (const auto& a : annotations) out.push_back(ids.try_emplace(a.label, static_cast<int>(ids.size())).first->second);
  return out;
}

}  // namespace symstream
