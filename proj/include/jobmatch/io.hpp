#pragma once

#include "jobmatch/estimator.hpp"
#include "jobmatch/model.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace jobmatch {

enum class TransferTransform { Identity, Log, Custom };

struct DatasetSchema {
  std::vector<std::string> worker_columns;
  std::vector<std::string> firm_columns;
  std::string transfer_column;              // empty: no transfers in the file
  TransferTransform transform = TransferTransform::Identity;
  std::string transform_label = "identity"; // free text for Custom
  std::string missing_marker;               // token for an absent transfer; empty field by default
  std::string weight_column;                // empty: uniform weights

  void validate() const;
};

std::string to_string(TransferTransform t);
TransferTransform transfer_transform_from_string(const std::string& s);

struct LoadedSample {
  MatchSample sample;
  int rows = 0;
  int missing = 0;
};

// CSV with a header row, comma delimiter and '.' decimals. Under the log transform the file
// holds wages and W = log(wage); a nonpositive wage is an error naming the line.
LoadedSample load_sample(const std::string& path, const DatasetSchema& schema);
LoadedSample read_sample(std::istream& in, const DatasetSchema& schema);

// Writes values with 17 significant digits; under the log transform it writes exp(W).
void save_sample(const std::string& path, const MatchSample& sample, const DatasetSchema& schema);
void write_sample(std::ostream& out, const MatchSample& sample, const DatasetSchema& schema);

// Writes `text` to `path`, throwing ConfigError when the file cannot be written.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace jobmatch
