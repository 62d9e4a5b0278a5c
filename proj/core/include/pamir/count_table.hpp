// Tab-separated count table ingestion and emission. First row holds taxon
// names, first column holds sample identifiers; an optional response
// column is extracted by name.
#pragma once

#include "pamir/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pamir {

struct CountTable {
  std::vector<std::string> sample_ids;
  std::vector<std::string> taxa;
  std::vector<CountVector> counts;         // one per sample
  std::optional<std::vector<double>> response;
  std::string response_column;

  Eigen::Index n() const { return static_cast<Eigen::Index>(sample_ids.size()); }
  Eigen::Index p() const { return static_cast<Eigen::Index>(taxa.size()); }
};

// Parse errors carry 1-based line/column positions.
CountTable read_count_table(const std::string& path,
                            const std::optional<std::string>& response_column =
                                std::nullopt);

void write_count_table(const CountTable& table, const std::string& path);

// Reorders taxa so that `reference` (by name) comes last; identity when
// reference is already last or empty.
CountTable with_reference_taxon(const CountTable& table,
                                const std::string& reference);

// Permutation mapping table column order onto `target_taxa` order; throws
// listing missing/extra names when the sets differ.
std::vector<Eigen::Index> taxon_alignment(
    const std::vector<std::string>& table_taxa,
    const std::vector<std::string>& target_taxa);

}  // namespace pamir
