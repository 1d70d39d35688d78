#include "cvxreg/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cvxreg/errors.hpp"

namespace cvxreg {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  out.push_back(cell);
  return out;
}

double parse_number(const std::string& cell, const std::string& origin, std::size_t line_no,
                    std::size_t col_no) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    std::ostringstream msg;
    msg << origin << ":" << line_no << ": column " << col_no << ": '" << cell
        << "' is not a number";
    throw ParseError(msg.str());
  }
  return value;
}

void format_value(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

Dataset dataset_from_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(origin + ": empty file");
  auto header = split_line(line);
  if (header.size() < 2) throw ParseError(origin + ":1: header needs at least one covariate and y");
  const bool tagged = header.front() == "tag";
  const std::size_t first_x = tagged ? 1 : 0;
  if (header.back() != "y")
    throw ParseError(origin + ":1: last header column must be 'y', got '" + header.back() + "'");
  const std::size_t d = header.size() - first_x - 1;
  if (d < 1) throw ParseError(origin + ":1: no covariate columns before 'y'");

  std::vector<std::string> tags;
  std::vector<std::string> columns(header.begin() + static_cast<std::ptrdiff_t>(first_x),
                                   header.end() - 1);
  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << origin << ":" << line_no << ": expected " << header.size() << " cells, got "
          << cells.size();
      throw ParseError(msg.str());
    }
    if (tagged) tags.push_back(cells[0]);
    for (std::size_t k = 0; k < d; ++k)
      xs.push_back(parse_number(cells[first_x + k], origin, line_no, first_x + k + 1));
    ys.push_back(parse_number(cells.back(), origin, line_no, cells.size()));
  }
  if (ys.empty()) throw ParseError(origin + ": no data rows");

  Dataset data;
  const auto n = static_cast<Eigen::Index>(ys.size());
  data.x.resize(n, static_cast<Eigen::Index>(d));
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(d); ++k)
      data.x(i, k) = xs[static_cast<std::size_t>(i) * d + static_cast<std::size_t>(k)];
    data.y[i] = ys[static_cast<std::size_t>(i)];
  }
  data.columns = std::move(columns);
  data.tags = std::move(tags);
  data.validate();
  return data;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return dataset_from_csv(buf.str(), path);
}

std::string dataset_to_csv(const Dataset& data) {
  std::ostringstream out;
  const bool tagged = !data.tags.empty();
  if (tagged) out << "tag,";
  for (int k = 0; k < data.dim(); ++k) {
    if (static_cast<std::size_t>(k) < data.columns.size()) {
      out << data.columns[static_cast<std::size_t>(k)];
    } else {
      out << "x" << (k + 1);
    }
    out << ",";
  }
  out << "y\n";
  for (int i = 0; i < data.n(); ++i) {
    if (tagged) out << data.tags[static_cast<std::size_t>(i)] << ",";
    for (int k = 0; k < data.dim(); ++k) {
      format_value(out, data.x(i, k));
      out << ",";
    }
    format_value(out, data.y[i]);
    out << "\n";
  }
  return out.str();
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << dataset_to_csv(data);
  if (!out) throw DataError("failed writing '" + path + "'");
}

void write_predictions_csv(const Dataset& data, const PwlModel& model, bool with_subgradients,
                           const std::string& path) {
  if (data.dim() != model.dim())
    throw DimensionError("prediction data has d=" + std::to_string(data.dim()) +
                         " but the model has d=" + std::to_string(model.dim()));
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  const bool tagged = !data.tags.empty();
  if (tagged) out << "tag,";
  for (int k = 0; k < data.dim(); ++k) {
    if (static_cast<std::size_t>(k) < data.columns.size()) {
      out << data.columns[static_cast<std::size_t>(k)];
    } else {
      out << "x" << (k + 1);
    }
    out << ",";
  }
  out << "y,yhat";
  if (with_subgradients)
    for (int k = 0; k < data.dim(); ++k) out << ",beta" << (k + 1);
  out << "\n";
  for (int i = 0; i < data.n(); ++i) {
    if (tagged) out << data.tags[static_cast<std::size_t>(i)] << ",";
    for (int k = 0; k < data.dim(); ++k) {
      format_value(out, data.x(i, k));
      out << ",";
    }
    format_value(out, data.y[i]);
    out << ",";
    const Vector query = data.x.row(i);
    format_value(out, evaluate(model, query));
    if (with_subgradients) {
      const Vector beta = subgradient_at(model, query);
      for (int k = 0; k < data.dim(); ++k) {
        out << ",";
        format_value(out, beta[k]);
      }
    }
    out << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace cvxreg
