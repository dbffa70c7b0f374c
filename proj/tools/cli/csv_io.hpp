#pragma once

// Dataset CSV (header `curve_id,t,y`) and long-format plot CSV
// (header `series,t,value`). Numbers are written in shortest round-trip form,
// so write-then-read reproduces every double exactly.

#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "bfpca/dataset.hpp"
#include "bfpca/postprocess.hpp"

namespace bfpca::cli {

// Rows may appear in any order; curves are grouped by curve_id in order of
// first appearance and keep their row order. Throws IoError when the file
// cannot be opened and ValidationError for malformed content.
FunctionalDataset read_dataset_csv(const std::string& path);
FunctionalDataset parse_dataset_csv(std::istream& in, const std::string& source = "<stream>");

void write_dataset_csv(const FunctionalDataset& data, const std::string& path);
void write_dataset_csv(const FunctionalDataset& data, std::ostream& out);

// Series `mean`, `psi_1..psi_L` and `fit_<curve id>` evaluated on the grid.
void write_plot_csv(const FpcaFit& fit, const FunctionalDataset& data, const std::string& path);
void write_plot_csv(const FpcaFit& fit, const FunctionalDataset& data, std::ostream& out);

// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

}  // namespace bfpca::cli
