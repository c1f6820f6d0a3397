#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "kercoup/decompose.hpp"
#include "kercoup/kernel.hpp"

namespace kercoup {

/// Malformed input file (bad JSON, bad rational, broken invariants).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Problem file:
/// {
///   "states": ["1","2"],
///   "proposal": [["1/2","1/2"],["1/2","1/2"]],
///   "target": ["1/3","2/3"] | null,
///   "acceptance": {"rule": "mh" | "barker" | "explicit", "matrix": [[..]]}
/// }
/// All numbers are exact rational strings; rows must sum to exactly 1.
MhProblem load_problem(const std::string& json_text);
MhProblem load_problem_file(const std::string& path);

/// Coupling file:
/// {
///   "pair": ["1","2"],
///   "orientation": "x-rows" (default) | "paper",
///   "matrix": n x n rational strings
/// }
/// With "x-rows", matrix[i][j] is the mass of (x'=state_i, y'=state_j).
/// With "paper", rows list the y-destination and columns the x-destination
/// (the layout used for matrix displays with the x value on top), and the
/// loader transposes.
struct LoadedCoupling {
  std::size_t x = 0, y = 0;
  JointDist gamma;
};

LoadedCoupling load_coupling(const std::string& json_text, const SpacePtr& space);
LoadedCoupling load_coupling_file(const std::string& path, const SpacePtr& space);

/// Serializes in "x-rows" orientation, plus an "entries" object listing the
/// non-zero cells as "(x_label,y_label)" -> rational string.
std::string coupling_to_json(const JointDist& gamma, const std::string& x_label,
                             const std::string& y_label);

/// Acceptance coupling file: per-cell outcome 4-vectors (p11, p10, p01, p00)
/// as rational strings, with the off-support fill flagged.
std::string acceptance_coupling_to_json(const AcceptanceCoupling& b);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace kercoup
