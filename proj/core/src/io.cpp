#include "kercoup/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kercoup {

namespace {

using nlohmann::json;

Rational parse_rational(const json& j, const std::string& where) {
  try {
    if (j.is_string()) return Rational::parse(j.get<std::string>());
    if (j.is_number_integer()) return Rational(j.get<long>());
  } catch (const std::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
  throw ParseError(where + ": expected a rational string like \"1/2\"");
}

std::vector<Rational> parse_row(const json& j, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n) {
    throw ParseError(where + ": expected an array of " + std::to_string(n) + " rationals");
  }
  std::vector<Rational> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(parse_rational(j[i], where));
  return out;
}

json parse_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("invalid JSON");
  return j;
}

}  // namespace

MhProblem load_problem(const std::string& json_text) {
  const json j = parse_json(json_text);
  if (!j.contains("states") || !j["states"].is_array() || j["states"].empty()) {
    throw ParseError("problem: missing or empty \"states\"");
  }
  std::vector<std::string> labels;
  for (const auto& s : j["states"]) {
    if (!s.is_string()) throw ParseError("problem: state names must be strings");
    labels.push_back(s.get<std::string>());
  }
  SpacePtr space;
  try {
    space = make_space(std::move(labels));
  } catch (const std::exception& e) {
    throw ParseError(std::string("problem: ") + e.what());
  }
  const std::size_t n = space->size();

  if (!j.contains("proposal") || !j["proposal"].is_array() || j["proposal"].size() != n) {
    throw ParseError("problem: \"proposal\" must be an n x n matrix of rationals");
  }
  FiniteKernel Q = [&] {
    std::vector<std::vector<Rational>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(parse_row(j["proposal"][i], n, "proposal row " + space->label(i)));
    }
    try {
      return FiniteKernel::from_weights(space, std::move(rows));
    } catch (const std::exception& e) {
      throw ParseError(std::string("proposal: ") + e.what());
    }
  }();

  std::string rule = "mh";
  if (j.contains("acceptance")) {
    if (!j["acceptance"].is_object() || !j["acceptance"].contains("rule")) {
      throw ParseError("problem: \"acceptance\" must be {\"rule\": ...}");
    }
    rule = j["acceptance"]["rule"].get<std::string>();
  }

  AcceptanceMatrix a = [&] {
    if (rule == "explicit") {
      if (!j["acceptance"].contains("matrix")) {
        throw ParseError("problem: explicit acceptance needs a \"matrix\"");
      }
      std::vector<std::vector<Rational>> rows;
      for (std::size_t i = 0; i < n; ++i) {
        rows.push_back(parse_row(j["acceptance"]["matrix"][i], n, "acceptance row " + space->label(i)));
      }
      try {
        return AcceptanceMatrix::checked(space, std::move(rows));
      } catch (const std::exception& e) {
        throw ParseError(std::string("acceptance: ") + e.what());
      }
    }
    if (rule != "mh" && rule != "barker") {
      throw ParseError("problem: unknown acceptance rule \"" + rule + "\"");
    }
    if (!j.contains("target") || j["target"].is_null()) {
      throw ParseError("problem: rule \"" + rule + "\" needs a \"target\" distribution");
    }
    Dist pi = [&] {
      try {
        return Dist::checked(space, parse_row(j["target"], n, "target"));
      } catch (const ParseError&) {
        throw;
      } catch (const std::exception& e) {
        throw ParseError(std::string("target: ") + e.what());
      }
    }();
    try {
      return rule == "mh" ? mh_acceptance(pi, Q) : barker_acceptance(pi, Q);
    } catch (const std::exception& e) {
      throw ParseError(std::string("acceptance: ") + e.what());
    }
  }();

  return MhProblem::make(std::move(Q), std::move(a));
}

MhProblem load_problem_file(const std::string& path) { return load_problem(read_text_file(path)); }

LoadedCoupling load_coupling(const std::string& json_text, const SpacePtr& space) {
  const json j = parse_json(json_text);
  const std::size_t n = space->size();
  if (!j.contains("pair") || !j["pair"].is_array() || j["pair"].size() != 2) {
    throw ParseError("coupling: \"pair\" must name the two current states");
  }
  LoadedCoupling out;
  try {
    out.x = space->index_of(j["pair"][0].get<std::string>());
    out.y = space->index_of(j["pair"][1].get<std::string>());
  } catch (const std::exception& e) {
    throw ParseError(std::string("coupling pair: ") + e.what());
  }
  std::string orientation = "x-rows";
  if (j.contains("orientation")) orientation = j["orientation"].get<std::string>();
  if (orientation != "x-rows" && orientation != "paper") {
    throw ParseError("coupling: orientation must be \"x-rows\" or \"paper\"");
  }
  if (!j.contains("matrix") || !j["matrix"].is_array() || j["matrix"].size() != n) {
    throw ParseError("coupling: \"matrix\" must be an n x n matrix of rationals");
  }
  std::vector<std::vector<Rational>> m;
  for (std::size_t i = 0; i < n; ++i) {
    m.push_back(parse_row(j["matrix"][i], n, "coupling matrix row " + std::to_string(i)));
  }
  if (orientation == "paper") {
    // Paper layout: rows are y-destinations, columns x-destinations.
    std::vector<std::vector<Rational>> t(n, std::vector<Rational>(n));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) t[c][r] = m[r][c];
    }
    m = std::move(t);
  }
  try {
    out.gamma = JointDist::checked(space, std::move(m));
  } catch (const std::exception& e) {
    throw ParseError(std::string("coupling: ") + e.what());
  }
  return out;
}

LoadedCoupling load_coupling_file(const std::string& path, const SpacePtr& space) {
  return load_coupling(read_text_file(path), space);
}

std::string coupling_to_json(const JointDist& gamma, const std::string& x_label,
                             const std::string& y_label) {
  json j;
  j["pair"] = {x_label, y_label};
  j["orientation"] = "x-rows";
  json rows = json::array();
  json entries = json::object();
  const std::size_t n = gamma.size();
  for (std::size_t i = 0; i < n; ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < n; ++k) {
      row.push_back(gamma.at(i, k).str());
      if (!gamma.at(i, k).is_zero()) {
        entries["(" + gamma.space->label(i) + "," + gamma.space->label(k) + ")"] = gamma.at(i, k).str();
      }
    }
    rows.push_back(std::move(row));
  }
  j["matrix"] = std::move(rows);
  j["entries"] = std::move(entries);
  return j.dump(2) + "\n";
}

std::string acceptance_coupling_to_json(const AcceptanceCoupling& b) {
  json j;
  j["outcomes"] = {"p11", "p10", "p01", "p00"};
  json cells = json::object();
  const std::size_t n = b.probs.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      json cell;
      cell["p"] = {b.probs[i][k][0].str(), b.probs[i][k][1].str(), b.probs[i][k][2].str(),
                   b.probs[i][k][3].str()};
      cell["off_support"] = static_cast<bool>(b.off_support[i][k]);
      cells["(" + b.space->label(i) + "," + b.space->label(k) + ")"] = std::move(cell);
    }
  }
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

}  // namespace kercoup
