#include "jobmatch/io.hpp"

#include "jobmatch/error.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace jobmatch {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, long line, const std::string& column) {
  const std::string s = trim(field);
  if (s.empty()) throw ParseError("line " + std::to_string(line) + ": empty value in column '" +
                                  column + "'", line);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": invalid number '" + s + "' in column '" +
                     column + "'", line);
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(TransferTransform t) {
  switch (t) {
    case TransferTransform::Identity: return "identity";
    case TransferTransform::Log: return "log";
    case TransferTransform::Custom: return "custom";
  }
  return "identity";
}

TransferTransform transfer_transform_from_string(const std::string& s) {
  if (s == "identity") return TransferTransform::Identity;
  if (s == "log") return TransferTransform::Log;
  return TransferTransform::Custom;
}

void DatasetSchema::validate() const {
  if (worker_columns.empty() || firm_columns.empty()) {
    throw ConfigError("schema needs at least one worker and one firm column");
  }
  std::set<std::string> seen;
  auto add = [&](const std::string& name) {
    if (name.empty()) return;
    if (!seen.insert(name).second) throw ConfigError("column '" + name + "' is used twice in the schema");
  };
  for (const auto& c : worker_columns) add(c);
  for (const auto& c : firm_columns) add(c);
  add(transfer_column);
  add(weight_column);
}

LoadedSample read_sample(std::istream& in, const DatasetSchema& schema) {
  schema.validate();
  std::string line;
  long lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty file: missing header row", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv(line);
  std::map<std::string, int> pos;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (!pos.emplace(trim(header[c]), c).second) {
      throw ParseError("line 1: duplicate column '" + trim(header[c]) + "'", 1);
    }
  }
  auto index_of = [&](const std::string& name) {
    const auto it = pos.find(name);
    if (it == pos.end()) throw ParseError("line 1: column '" + name + "' not in header", 1);
    return it->second;
  };
  std::vector<int> wc, fc;
  for (const auto& c : schema.worker_columns) wc.push_back(index_of(c));
  for (const auto& c : schema.firm_columns) fc.push_back(index_of(c));
  const int tc = schema.transfer_column.empty() ? -1 : index_of(schema.transfer_column);
  const int vc = schema.weight_column.empty() ? -1 : index_of(schema.weight_column);

  std::vector<std::vector<double>> xs, ys;
  Transfers W;
  std::vector<double> weights;
  int missing = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()), lineno);
    }
    std::vector<double> x, y;
    for (std::size_t k = 0; k < wc.size(); ++k) {
      x.push_back(parse_double(fields[wc[k]], lineno, schema.worker_columns[k]));
    }
    for (std::size_t k = 0; k < fc.size(); ++k) {
      y.push_back(parse_double(fields[fc[k]], lineno, schema.firm_columns[k]));
    }
    xs.push_back(std::move(x));
    ys.push_back(std::move(y));
    std::optional<double> w;
    if (tc >= 0) {
      const std::string raw = trim(fields[tc]);
      if (!(raw.empty() || raw == schema.missing_marker)) {
        double v = parse_double(raw, lineno, schema.transfer_column);
        if (schema.transform == TransferTransform::Log) {
          if (v <= 0.0) {
            throw ParseError("line " + std::to_string(lineno) + ": nonpositive wage " + raw +
                             " under the log transform", lineno);
          }
          v = std::log(v);
        }
        w = v;
      }
    }
    if (!w) ++missing;
    W.push_back(w);
    if (vc >= 0) {
      const double v = parse_double(fields[vc], lineno, schema.weight_column);
      if (!(v > 0.0)) {
        throw ParseError("line " + std::to_string(lineno) + ": weights must be positive", lineno);
      }
      weights.push_back(v);
    }
  }
  const int n = static_cast<int>(xs.size());
  if (n == 0) throw ParseError("no data rows", lineno);

  RowMatrix X(n, static_cast<Eigen::Index>(wc.size()));
  RowMatrix Y(n, static_cast<Eigen::Index>(fc.size()));
  for (int i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < wc.size(); ++k) X(i, k) = xs[i][k];
    for (std::size_t k = 0; k < fc.size(); ++k) Y(i, k) = ys[i][k];
  }
  Vector wv;
  if (vc >= 0) {
    wv = Eigen::Map<Vector>(weights.data(), n);
    wv /= wv.sum();
  }
  LoadedSample out{MatchSample(std::move(X), std::move(Y), std::move(W), std::move(wv)), n, missing};
  return out;
}

LoadedSample load_sample(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  return read_sample(in, schema);
}

void write_sample(std::ostream& out, const MatchSample& sample, const DatasetSchema& schema) {
  schema.validate();
  if (static_cast<int>(schema.worker_columns.size()) != sample.worker_dim() ||
      static_cast<int>(schema.firm_columns.size()) != sample.firm_dim()) {
    throw ConfigError("schema columns do not match the sample dimensions");
  }
  std::string sep;
  for (const auto& c : schema.worker_columns) { out << sep << c; sep = ","; }
  for (const auto& c : schema.firm_columns) out << ',' << c;
  if (!schema.transfer_column.empty()) out << ',' << schema.transfer_column;
  if (!schema.weight_column.empty()) out << ',' << schema.weight_column;
  out << '\n';
  for (int i = 0; i < sample.n(); ++i) {
    sep.clear();
    for (int k = 0; k < sample.worker_dim(); ++k) {
      out << sep << format_double(sample.workers()(i, k));
      sep = ",";
    }
    for (int k = 0; k < sample.firm_dim(); ++k) out << ',' << format_double(sample.firms()(i, k));
    if (!schema.transfer_column.empty()) {
      out << ',';
      if (const auto& w = sample.transfers()[i]) {
        out << format_double(schema.transform == TransferTransform::Log ? std::exp(*w) : *w);
      } else {
        out << schema.missing_marker;
      }
    }
    if (!schema.weight_column.empty()) out << ',' << format_double(sample.weights()(i));
    out << '\n';
  }
}

void save_sample(const std::string& path, const MatchSample& sample, const DatasetSchema& schema) {
  std::ostringstream ss;
  write_sample(ss, sample, schema);
  write_text_file(path, ss.str());
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  out.close();
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace jobmatch
