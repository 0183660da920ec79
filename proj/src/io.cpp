// SPDX-License-Identifier: Apache-2.0
#include "milpfix/io.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <map>
#include <sstream>
#include <unordered_map>

namespace milpfix {

namespace {

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string field_line(const std::string& a, const std::string& b, const std::string& value) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "    %-8s  %-8s  %s\n", a.c_str(), b.c_str(), value.c_str());
  return buf;
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

double parse_number(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') fail(ErrorCode::ParseError, "bad number '" + text + "'");
  return v;
}

}  // namespace

void write_mps(const MilpInstance& instance, std::ostream& out, const std::string& name) {
  instance.validate();
  const Index n = instance.num_vars();
  const Index m = instance.num_rows();
  // Column-wise view of A.
  const Eigen::SparseMatrix<double, Eigen::ColMajor> cols = instance.A;
  out << "NAME          " << name << "\n";
  out << "ROWS\n";
  out << " N  OBJ\n";
  for (Index i = 0; i < m; ++i) out << " L  R" << i << "\n";
  out << "COLUMNS\n";
  const std::string marker = "    MARKER                 'MARKER'                 ";
  if (instance.num_binary > 0) out << marker << "'INTORG'\n";
  for (Index j = 0; j < n; ++j) {
    const std::string col = "X" + std::to_string(j);
    bool wrote = false;
    if (instance.c(j) != 0.0) {
      out << field_line(col, "OBJ", number(instance.c(j)));
      wrote = true;
    }
    for (Eigen::SparseMatrix<double, Eigen::ColMajor>::InnerIterator it(cols, j); it; ++it) {
      out << field_line(col, "R" + std::to_string(it.row()), number(it.value()));
      wrote = true;
    }
    if (!wrote) out << field_line(col, "OBJ", "0");
    if (j + 1 == instance.num_binary) out << marker << "'INTEND'\n";
  }
  out << "RHS\n";
  for (Index i = 0; i < m; ++i) {
    if (instance.b(i) != 0.0) out << field_line("RHS", "R" + std::to_string(i), number(instance.b(i)));
  }
  out << "BOUNDS\n";
  for (Index j = 0; j < n; ++j) {
    out << (j < instance.num_binary ? " BV BND       X" : " FR BND       X") << j << "\n";
  }
  out << "ENDATA\n";
}

void export_mps(const MilpInstance& instance, const std::filesystem::path& destination) {
  std::ofstream out(destination);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + destination.string() + " for writing");
  write_mps(instance, out);
  out.flush();
  if (!out) fail(ErrorCode::IoFailure, "write to " + destination.string() + " failed");
}

MilpInstance read_mps(std::istream& in) {
  enum class Section { None, Rows, Columns, Rhs, Bounds, Done } section = Section::None;
  std::string objective_row;
  std::vector<std::string> row_names;
  std::vector<char> row_kind;
  std::unordered_map<std::string, Index> row_index;
  std::vector<std::string> col_names;
  std::unordered_map<std::string, Index> col_index;
  std::vector<bool> col_integer;
  std::vector<std::optional<bool>> col_bound_binary;
  std::map<std::pair<Index, Index>, double> entries;  // (row, col)
  std::unordered_map<Index, double> costs;
  std::unordered_map<Index, double> rhs;
  bool in_int_block = false;

  auto column = [&](const std::string& name) {
    auto it = col_index.find(name);
    if (it != col_index.end()) return it->second;
    const Index j = static_cast<Index>(col_names.size());
    col_names.push_back(name);
    col_index.emplace(name, j);
    col_integer.push_back(in_int_block);
    col_bound_binary.emplace_back();
    return j;
  };

  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '*') continue;
    const auto tok = tokens(line);
    if (tok.empty()) continue;
    if (line[0] != ' ' && line[0] != '\t') {
      const std::string& head = tok[0];
      if (head == "NAME") section = Section::None;
      else if (head == "ROWS") section = Section::Rows;
      else if (head == "COLUMNS") section = Section::Columns;
      else if (head == "RHS") section = Section::Rhs;
      else if (head == "BOUNDS") section = Section::Bounds;
      else if (head == "ENDATA") section = Section::Done;
      else fail(ErrorCode::ParseError, "unsupported MPS section '" + head + "'");
      continue;
    }
    switch (section) {
      case Section::Rows: {
        if (tok.size() != 2) fail(ErrorCode::ParseError, "bad ROWS line: " + line);
        const char kind = tok[0][0];
        if (kind == 'N') {
          if (objective_row.empty()) objective_row = tok[1];
        } else if (kind == 'L' || kind == 'G' || kind == 'E') {
          row_index.emplace(tok[1], static_cast<Index>(row_names.size()));
          row_names.push_back(tok[1]);
          row_kind.push_back(kind);
        } else {
          fail(ErrorCode::ParseError, "unknown row type in: " + line);
        }
        break;
      }
      case Section::Columns: {
        if (tok.size() >= 3 && tok[1] == "'MARKER'") {
          if (tok[2] == "'INTORG'") in_int_block = true;
          else if (tok[2] == "'INTEND'") in_int_block = false;
          else fail(ErrorCode::ParseError, "bad marker: " + line);
          break;
        }
        if (tok.size() != 3 && tok.size() != 5) fail(ErrorCode::ParseError, "bad COLUMNS line: " + line);
        const Index j = column(tok[0]);
        for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
          const double v = parse_number(tok[k + 1]);
          if (tok[k] == objective_row) {
            costs[j] = v;
          } else {
            auto r = row_index.find(tok[k]);
            if (r == row_index.end()) fail(ErrorCode::ParseError, "unknown row '" + tok[k] + "'");
            entries[{r->second, j}] = v;
          }
        }
        break;
      }
      case Section::Rhs: {
        if (tok.size() != 3 && tok.size() != 5) fail(ErrorCode::ParseError, "bad RHS line: " + line);
        for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
          if (tok[k] == objective_row) continue;
          auto r = row_index.find(tok[k]);
          if (r == row_index.end()) fail(ErrorCode::ParseError, "unknown row '" + tok[k] + "'");
          rhs[r->second] = parse_number(tok[k + 1]);
        }
        break;
      }
      case Section::Bounds: {
        if (tok.size() < 3) fail(ErrorCode::ParseError, "bad BOUNDS line: " + line);
        auto c = col_index.find(tok[2]);
        if (c == col_index.end()) fail(ErrorCode::ParseError, "unknown column '" + tok[2] + "'");
        if (tok[0] == "BV") col_bound_binary[static_cast<std::size_t>(c->second)] = true;
        else if (tok[0] == "FR") col_bound_binary[static_cast<std::size_t>(c->second)] = false;
        else fail(ErrorCode::ParseError, "unsupported bound type '" + tok[0] + "'");
        break;
      }
      default:
        fail(ErrorCode::ParseError, "data outside a section: " + line);
    }
  }
  if (section != Section::Done) fail(ErrorCode::ParseError, "missing ENDATA");

  const Index n = static_cast<Index>(col_names.size());
  Index num_binary = 0;
  for (Index j = 0; j < n; ++j) {
    const auto idx = static_cast<std::size_t>(j);
    const bool binary = col_bound_binary[idx].value_or(col_integer[idx]);
    if (binary && j != num_binary) fail(ErrorCode::ParseError, "binary columns must precede continuous ones");
    num_binary += binary ? 1 : 0;
  }

  MilpWithEqualities problem;
  MilpInstance& inst = problem.base;
  const Index m = static_cast<Index>(row_names.size());
  std::vector<Triplet> trip;
  for (const auto& [key, v] : entries) {
    const double sign = row_kind[static_cast<std::size_t>(key.first)] == 'G' ? -1.0 : 1.0;
    trip.emplace_back(key.first, key.second, sign * v);
  }
  inst.A = make_sparse(m, n, trip);
  inst.b = Vector::Zero(m);
  for (const auto& [i, v] : rhs) inst.b(i) = row_kind[static_cast<std::size_t>(i)] == 'G' ? -v : v;
  inst.c = Vector::Zero(n);
  for (const auto& [j, v] : costs) inst.c(j) = v;
  inst.num_binary = num_binary;
  inst.num_continuous = n - num_binary;
  problem.is_equality.resize(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) problem.is_equality[static_cast<std::size_t>(i)] = row_kind[static_cast<std::size_t>(i)] == 'E';
  return to_standard_form(problem);
}

MilpInstance read_mps(const std::filesystem::path& source) {
  std::ifstream in(source);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + source.string());
  return read_mps(in);
}

nlohmann::json instance_to_json(const MilpInstance& instance) {
  instance.validate();
  nlohmann::json j;
  j["num_binary"] = instance.num_binary;
  j["num_continuous"] = instance.num_continuous;
  j["num_rows"] = instance.num_rows();
  j["c"] = std::vector<double>(instance.c.data(), instance.c.data() + instance.c.size());
  j["b"] = std::vector<double>(instance.b.data(), instance.b.data() + instance.b.size());
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < instance.num_rows(); ++i) {
    for (SparseMatrix::InnerIterator it(instance.A, i); it; ++it) a.push_back({i, it.col(), it.value()});
  }
  j["A"] = std::move(a);
  return j;
}

namespace {

Vector to_vector(const nlohmann::json& arr) {
  const auto v = arr.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

MilpInstance instance_from_json(const nlohmann::json& record) {
  try {
    MilpInstance inst;
    inst.num_binary = record.at("num_binary").get<Index>();
    inst.num_continuous = record.at("num_continuous").get<Index>();
    const Index m = record.at("num_rows").get<Index>();
    inst.c = to_vector(record.at("c"));
    inst.b = to_vector(record.at("b"));
    std::vector<Triplet> trip;
    for (const auto& e : record.at("A")) trip.emplace_back(e.at(0).get<Index>(), e.at(1).get<Index>(), e.at(2).get<double>());
    inst.A = make_sparse(m, inst.num_vars(), trip);
    inst.validate();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("instance record: ") + e.what());
  }
}

nlohmann::json label_to_json(const Label& label) {
  nlohmann::json j;
  j["status"] = std::string(to_string(label.status));
  j["z"] = std::vector<double>(label.z.data(), label.z.data() + label.z.size());
  j["objective"] = label.objective;
  j["solve_seconds"] = label.solve_seconds;
  return j;
}

Label label_from_json(const nlohmann::json& record) {
  try {
    Label l;
    l.status = solve_status_from_string(record.at("status").get<std::string>());
    l.z = to_vector(record.at("z"));
    l.objective = record.at("objective").get<double>();
    l.solve_seconds = record.value("solve_seconds", 0.0);
    return l;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("label record: ") + e.what());
  }
}

void write_series(const std::vector<InstanceSeries>& series, std::ostream& out) {
  for (const auto& s : series) {
    for (Index t = 0; t < s.length(); ++t) {
      nlohmann::json j = instance_to_json(s.steps[static_cast<std::size_t>(t)]);
      j["format_version"] = kSeriesFormatVersion;
      j["series"] = s.id;
      j["family"] = s.family;
      j["t"] = t;
      if (static_cast<std::size_t>(t) < s.labels.size() && s.labels[static_cast<std::size_t>(t)]) {
        j["label"] = label_to_json(*s.labels[static_cast<std::size_t>(t)]);
      }
      out << j.dump() << "\n";
    }
  }
}

void save_series(const std::vector<InstanceSeries>& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  write_series(series, out);
  out.flush();
  if (!out) fail(ErrorCode::IoFailure, "write to " + path.string() + " failed");
}

std::vector<InstanceSeries> read_series(std::istream& in) {
  std::vector<InstanceSeries> out;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<Index> last_t;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.value("format_version", 0) != kSeriesFormatVersion) {
      fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": unsupported format_version");
    }
    const std::string id = j.at("series").get<std::string>();
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, out.size()).first;
      out.push_back({id, j.value("family", std::string{}), {}, {}});
      last_t.push_back(-1);
    }
    const Index t = j.at("t").get<Index>();
    if (t <= last_t[it->second]) {
      fail(ErrorCode::ParseError, "series " + id + ": timesteps not strictly increasing");
    }
    last_t[it->second] = t;
    InstanceSeries& s = out[it->second];
    s.steps.push_back(instance_from_json(j));
    s.labels.push_back(j.contains("label") ? std::optional<Label>(label_from_json(j.at("label"))) : std::nullopt);
  }
  return out;
}

std::vector<InstanceSeries> load_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  return read_series(in);
}

}  // namespace milpfix
