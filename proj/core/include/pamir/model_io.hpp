// Versioned JSON model document: fitted parameters, basis specification
// with its centering offset, training responses, and fit metadata.
// Write -> read -> write round-trips byte-identically.
#pragma once

#include "pamir/mcem.hpp"
#include "pamir/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pamir {

inline constexpr int kModelFileVersion = 1;

struct FitMetadata {
  std::uint64_t seed = 0;
  bool converged = false;
  int iterations = 0;
  double final_delta = 0.0;
  double mean_acceptance = 0.0;
  double max_constraint_violation = 0.0;
  FitConfig config;
};

struct ModelFile {
  int version = kModelFileVersion;
  ModelParams theta;
  std::vector<std::string> taxa;  // model column order, reference last
  BasisSpec basis_spec;
  Vector basis_offset;
  std::vector<double> training_responses;
  FitMetadata meta;
};

ModelFile make_model_file(const FitResult& result, const Dataset& data,
                          const std::vector<std::string>& taxa,
                          const FitConfig& cfg);

std::string model_to_json(const ModelFile& model);
ModelFile model_from_json(const std::string& text);

void save_model(const ModelFile& model, const std::string& path);
ModelFile load_model(const std::string& path);

}  // namespace pamir
