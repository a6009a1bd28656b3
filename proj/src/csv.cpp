#include "ctmed/csv.hpp"

#include "ctmed/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ctmed {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

std::string trimmed(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trimmed(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trimmed(cur));
  return out;
}

double parse_field(const std::string& field, std::size_t data_row, const std::string& column,
                   const std::string& origin) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || field.empty()) {
    throw config_error(origin + ": unparsable value '" + field + "' in column '" + column +
                       "' at data row " + std::to_string(data_row));
  }
  if (!std::isfinite(v)) {
    throw config_error(origin + ": non-finite value in column '" + column + "' at data row " +
                       std::to_string(data_row));
  }
  return v;
}

struct HeaderLayout {
  Eigen::Index d_a = 0;
  Eigen::Index d_x = 0;
  std::vector<std::string> names;
};

HeaderLayout parse_header(const std::string& line, const std::string& origin) {
  HeaderLayout layout;
  layout.names = split_line(line);
  const auto& names = layout.names;
  std::size_t i = 0;
  while (i < names.size() && names[i] == "A" + std::to_string(i + 1)) ++i;
  layout.d_a = static_cast<Eigen::Index>(i);
  if (layout.d_a == 0) {
    throw config_error(origin + ": header must start with treatment columns A1..Ad");
  }
  if (i >= names.size() || names[i] != "M") {
    throw config_error(origin + ": expected column 'M' after the treatment columns");
  }
  ++i;
  std::size_t x0 = i;
  while (i < names.size() && names[i] == "X" + std::to_string(i - x0 + 1)) ++i;
  layout.d_x = static_cast<Eigen::Index>(i - x0);
  if (i >= names.size() || names[i] != "Y") {
    throw config_error(origin + ": expected column 'Y' after the covariate columns");
  }
  ++i;
  if (i != names.size()) {
    throw config_error(origin + ": unexpected trailing column '" + names[i] + "'");
  }
  return layout;
}

}  // namespace

Dataset parse_dataset_csv(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw config_error(origin + ": empty file");
  const HeaderLayout layout = parse_header(line, origin);
  const std::size_t width = layout.names.size();

  std::vector<std::vector<double>> rows;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (trimmed(line).empty()) continue;
    ++data_row;
    const auto fields = split_line(line);
    if (fields.size() != width) {
      throw config_error(origin + ": expected " + std::to_string(width) + " fields but found " +
                         std::to_string(fields.size()) + " at data row " +
                         std::to_string(data_row));
    }
    std::vector<double> values(width);
    for (std::size_t c = 0; c < width; ++c) {
      values[c] = parse_field(fields[c], data_row, layout.names[c], origin);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw config_error(origin + ": no data rows");

  Dataset d;
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  d.a.resize(n, layout.d_a);
  d.m.resize(n);
  d.x.resize(n, layout.d_x);
  d.y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& v = rows[static_cast<std::size_t>(r)];
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < layout.d_a; ++j) d.a(r, j) = v[c++];
    d.m(r) = v[c++];
    for (Eigen::Index j = 0; j < layout.d_x; ++j) d.x(r, j) = v[c++];
    d.y(r) = v[c++];
  }
  return d;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open dataset file '" + path + "'");
  return parse_dataset_csv(in, path);
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  for (Eigen::Index j = 0; j < data.treatment_dim(); ++j) {
    out << "A" << (j + 1) << ",";
  }
  out << "M,";
  for (Eigen::Index j = 0; j < data.covariate_dim(); ++j) {
    out << "X" << (j + 1) << ",";
  }
  out << "Y\n";
  for (Eigen::Index r = 0; r < data.n(); ++r) {
    for (Eigen::Index j = 0; j < data.treatment_dim(); ++j) {
      out << format_double(data.a(r, j)) << ",";
    }
    out << format_double(data.m(r)) << ",";
    for (Eigen::Index j = 0; j < data.covariate_dim(); ++j) {
      out << format_double(data.x(r, j)) << ",";
    }
    out << format_double(data.y(r)) << "\n";
  }
}

void write_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open '" + path + "' for writing");
  write_dataset_csv(data, out);
}

namespace {

std::string pair_field(const Eigen::VectorXd& v) {
  std::string s = format_double(v(0));
  for (Eigen::Index j = 1; j < v.size(); ++j) s += ";" + format_double(v(j));
  return s;
}

}  // namespace

std::string report_to_csv(const ExperimentReport& report, bool zero_wall_ms) {
  std::ostringstream out;
  out << "estimator,n,a,a_prime,pattern,bias,sd,rmse,mean_se,coverage,skew,kurtosis,"
         "reps_completed,wall_ms\n";
  for (const CellReport& c : report.cells) {
    out << estimator_name(c.estimator) << "," << c.n << "," << pair_field(c.pair.a) << ","
        << pair_field(c.pair.a_prime) << "," << pattern_name(c.pattern) << ","
        << format_double(c.bias) << "," << format_double(c.sd) << "," << format_double(c.rmse)
        << "," << format_double(c.mean_se) << "," << format_double(c.coverage) << ","
        << format_double(c.skew) << "," << format_double(c.kurtosis) << "," << c.reps_completed
        << "," << format_double(zero_wall_ms ? 0.0 : c.wall_ms) << "\n";
  }
  return out.str();
}

void write_report_csv(const ExperimentReport& report, const std::string& path,
                      bool zero_wall_ms) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open '" + path + "' for writing");
  out << report_to_csv(report, zero_wall_ms);
}

}  // namespace ctmed
