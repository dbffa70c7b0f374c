#include "csv_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bfpca/errors.hpp"

namespace bfpca::cli {

namespace {

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

// Splits one record. Fields may be double-quoted with "" as an escaped quote.
std::vector<std::string> split_record(std::string_view line, const std::string& source, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw ValidationError(where(source, line_no) + "unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

double parse_number(std::string_view text, const char* column, const std::string& source, std::size_t line_no) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ValidationError(where(source, line_no) + "column " + column + ": '" + std::string(text) +
                          "' is not a number");
  }
  return value;
}

bool needs_quotes(const std::string& s) {
  return s.find_first_of(",\"\n\r") != std::string::npos || (!s.empty() && (s.front() == ' ' || s.back() == ' '));
}

std::string quote(const std::string& s) {
  if (!needs_quotes(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw ValidationError("cannot format number");
  return std::string(buf, ptr);
}

FunctionalDataset parse_dataset_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  FunctionalDataset data;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<double>> ts, ys;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_record(line, source, line_no);
    if (!have_header) {
      if (fields.size() != 3 || trim(fields[0]) != "curve_id" || trim(fields[1]) != "t" ||
          trim(fields[2]) != "y") {
        throw ValidationError(where(source, line_no) + "expected header 'curve_id,t,y'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != 3) {
      throw ValidationError(where(source, line_no) + "expected 3 fields, got " + std::to_string(fields.size()));
    }
    const std::string& id = fields[0];
    if (id.empty()) throw ValidationError(where(source, line_no) + "empty curve_id");
    const double t = parse_number(fields[1], "t", source, line_no);
    const double y = parse_number(fields[2], "y", source, line_no);
    auto [it, inserted] = index.try_emplace(id, data.curves.size());
    if (inserted) {
      data.curves.push_back(Curve{id, {}, {}});
      ts.emplace_back();
      ys.emplace_back();
    }
    ts[it->second].push_back(t);
    ys[it->second].push_back(y);
  }
  if (in.bad()) throw IoError(source + ": read failed");
  if (!have_header) throw ValidationError(source + ": missing header 'curve_id,t,y'");

  for (std::size_t c = 0; c < data.curves.size(); ++c) {
    data.curves[c].t = Eigen::Map<const Eigen::VectorXd>(ts[c].data(), static_cast<Eigen::Index>(ts[c].size()));
    data.curves[c].y = Eigen::Map<const Eigen::VectorXd>(ys[c].data(), static_cast<Eigen::Index>(ys[c].size()));
  }
  return data;
}

FunctionalDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  return parse_dataset_csv(in, path);
}

void write_dataset_csv(const FunctionalDataset& data, std::ostream& out) {
  out << "curve_id,t,y\n";
  for (const Curve& curve : data.curves) {
    const std::string id = quote(curve.id);
    for (Eigen::Index j = 0; j < curve.t.size(); ++j) {
      out << id << ',' << format_double(curve.t(j)) << ',' << format_double(curve.y(j)) << '\n';
    }
  }
}

void write_dataset_csv(const FunctionalDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_dataset_csv(data, out);
  if (!out) throw IoError("write to '" + path + "' failed");
}

void write_plot_csv(const FpcaFit& fit, const FunctionalDataset& data, std::ostream& out) {
  if (static_cast<std::size_t>(fit.scores.rows()) != data.size()) {
    throw ValidationError("plot export: fit has " + std::to_string(fit.scores.rows()) + " curves, dataset has " +
                          std::to_string(data.size()));
  }
  out << "series,t,value\n";
  const auto emit = [&](const std::string& series, const Eigen::VectorXd& values) {
    const std::string name = quote(series);
    for (Eigen::Index g = 0; g < fit.grid.size(); ++g) {
      out << name << ',' << format_double(fit.grid(g)) << ',' << format_double(values(g)) << '\n';
    }
  };
  emit("mean", fit.mu);
  for (Eigen::Index l = 0; l < fit.psi.cols(); ++l) emit("psi_" + std::to_string(l + 1), fit.psi.col(l));
  const Eigen::MatrixXd fitted = fitted_curves(fit);
  for (std::size_t i = 0; i < data.size(); ++i) {
    emit("fit_" + data.curves[i].id, fitted.col(static_cast<Eigen::Index>(i)));
  }
}

void write_plot_csv(const FpcaFit& fit, const FunctionalDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_plot_csv(fit, data, out);
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace bfpca::cli
