#include "bnpreg/sample_store.hpp"

#include <sstream>

#include "bnpreg/error.hpp"
#include "bnpreg/text.hpp"

namespace bnpreg {

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

double parse_cell(const std::string& s, const char* file, std::size_t line) {
  double v = 0.0;
  if (!parse_double(s, v)) {
    fail(ErrorKind::io, "corrupt_samples",
         std::string(file) + " line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::uint64_t parse_iter(const std::string& s, const char* file, std::size_t line) {
  const double v = parse_cell(s, file, line);
  if (!(v >= 0.0)) fail(ErrorKind::io, "corrupt_samples", std::string(file) + ": bad iteration");
  return static_cast<std::uint64_t>(v);
}

}  // namespace

SampleStore::SampleStore(std::vector<std::string> names, std::vector<std::string> atom_coef_names)
    : names_(std::move(names)), atom_coef_names_(std::move(atom_coef_names)) {}

void SampleStore::append(std::uint64_t iteration, std::vector<double> row,
                         std::vector<AtomDraw> atoms) {
  if (row.size() != names_.size()) {
    fail(ErrorKind::numerical, "row_width", "draw has " + std::to_string(row.size()) +
                                                " values for " + std::to_string(names_.size()) +
                                                " parameters");
  }
  iterations_.push_back(iteration);
  values_.insert(values_.end(), row.begin(), row.end());
  for (auto& a : atoms) atoms_.push_back(std::move(a));
  atom_offsets_.push_back(atoms_.size());
}

std::span<const double> SampleStore::row(std::size_t r) const {
  return {values_.data() + r * names_.size(), names_.size()};
}

std::span<const AtomDraw> SampleStore::atoms(std::size_t r) const {
  return {atoms_.data() + atom_offsets_[r], atom_offsets_[r + 1] - atom_offsets_[r]};
}

std::optional<std::size_t> SampleStore::index_of(const std::string& name) const {
  for (std::size_t k = 0; k < names_.size(); ++k) {
    if (names_[k] == name) return k;
  }
  return std::nullopt;
}

std::vector<double> SampleStore::column(const std::string& name) const {
  const auto k = index_of(name);
  if (!k) fail(ErrorKind::not_found, "unknown_parameter", "no parameter named " + name);
  std::vector<double> out(n_draws());
  for (std::size_t r = 0; r < n_draws(); ++r) out[r] = values_[r * names_.size() + *k];
  return out;
}

double SampleStore::value(std::size_t r, const std::string& name) const {
  const auto k = index_of(name);
  if (!k) fail(ErrorKind::not_found, "unknown_parameter", "no parameter named " + name);
  return values_[r * names_.size() + *k];
}

std::string SampleStore::mc1_header() const {
  std::string s = "iter";
  for (const auto& n : names_) s += "," + n;
  return s + "\n";
}

std::string SampleStore::mc1_row(std::size_t r) const {
  std::string s = std::to_string(iterations_[r]);
  for (double v : row(r)) s += "," + format_double(v);
  return s + "\n";
}

std::string SampleStore::mix_header() const {
  std::string s = "iter,label,weight,sigma2";
  for (const auto& n : atom_coef_names_) s += "," + n;
  return s + "\n";
}

std::string SampleStore::mix_rows(std::size_t r) const {
  std::string s;
  const std::string it = std::to_string(iterations_[r]);
  for (const auto& a : atoms(r)) {
    s += it + "," + std::to_string(a.label) + "," + format_double(a.weight) + "," +
         format_double(a.sigma2);
    for (double c : a.coef) s += "," + format_double(c);
    s += "\n";
  }
  return s;
}

std::string SampleStore::to_mc1() const {
  std::string s = mc1_header();
  for (std::size_t r = 0; r < n_draws(); ++r) s += mc1_row(r);
  return s;
}

std::string SampleStore::to_mix() const {
  std::string s = mix_header();
  for (std::size_t r = 0; r < n_draws(); ++r) s += mix_rows(r);
  return s;
}

SampleStore SampleStore::parse(const std::string& mc1, const std::string& mix) {
  const auto mc1_lines = lines_of(mc1);
  const auto mix_lines = lines_of(mix);
  if (mc1_lines.empty() || mix_lines.empty()) {
    fail(ErrorKind::io, "corrupt_samples", "sample files lack a header");
  }
  auto head = split_fields(mc1_lines[0]);
  if (head.empty() || head[0] != "iter") fail(ErrorKind::io, "corrupt_samples", "bad MC1 header");
  auto mix_head = split_fields(mix_lines[0]);
  if (mix_head.size() < 4 || mix_head[0] != "iter") {
    fail(ErrorKind::io, "corrupt_samples", "bad MIX header");
  }
  SampleStore store(std::vector<std::string>(head.begin() + 1, head.end()),
                    std::vector<std::string>(mix_head.begin() + 4, mix_head.end()));
  std::size_t m = 1;
  for (std::size_t l = 1; l < mc1_lines.size(); ++l) {
    const auto f = split_fields(mc1_lines[l]);
    if (f.size() != head.size()) {
      fail(ErrorKind::io, "corrupt_samples", "MC1 line " + std::to_string(l + 1) + " is ragged");
    }
    const std::uint64_t it = parse_iter(f[0], "MC1", l + 1);
    std::vector<double> row;
    for (std::size_t k = 1; k < f.size(); ++k) row.push_back(parse_cell(f[k], "MC1", l + 1));
    std::vector<AtomDraw> atoms;
    for (; m < mix_lines.size(); ++m) {
      const auto g = split_fields(mix_lines[m]);
      if (g.size() != mix_head.size()) {
        fail(ErrorKind::io, "corrupt_samples", "MIX line " + std::to_string(m + 1) + " is ragged");
      }
      const std::uint64_t mit = parse_iter(g[0], "MIX", m + 1);
      if (mit < it) fail(ErrorKind::io, "corrupt_samples", "MIX rows out of order");
      if (mit > it) break;
      AtomDraw a;
      a.label = static_cast<int>(parse_cell(g[1], "MIX", m + 1));
      a.weight = parse_cell(g[2], "MIX", m + 1);
      a.sigma2 = parse_cell(g[3], "MIX", m + 1);
      for (std::size_t k = 4; k < g.size(); ++k) a.coef.push_back(parse_cell(g[k], "MIX", m + 1));
      atoms.push_back(std::move(a));
    }
    store.append(it, std::move(row), std::move(atoms));
  }
  if (m != mix_lines.size()) {
    fail(ErrorKind::io, "corrupt_samples", "MIX rows without a matching MC1 draw");
  }
  return store;
}

}  // namespace bnpreg
