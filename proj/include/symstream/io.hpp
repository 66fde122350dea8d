#pragma once

// Text formats: onset and annotation CSV, symbol sequences, descriptor
// tables and JSON lines.

#include <string>
#include <vector>

#include <json.hpp>

#include "symstream/common.hpp"
#include "symstream/synth.hpp"

namespace symstream {

/// One `time_seconds` per line, six decimals, with that header.
void write_onsets_csv(const std::string& path, const std::vector<double>& onsets);
std::vector<double> read_onsets_csv(const std::string& path);

/// `time_seconds,label`. The header line is optional on input.
std::vector<Annotation> read_annotations(const std::string& path);
void write_annotations(const std::string& path, const std::vector<Annotation>& annotations);

/// Newline-delimited integers.
std::vector<int> read_sequence(const std::string& path);
void write_sequence(const std::string& path, const std::vector<int>& seq);

/// Header `time_seconds,mfcc0_dct0,...`.
void write_descriptors_csv(const std::string& path, const std::vector<double>& times,
                           const std::vector<VectorX<double>>& rows);

void write_json(const std::string& path, const nlohmann::json& value);
void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& rows);

/// Dense integer labels in order of first appearance.
std::vector<int> encode_labels(const std::vector<Annotation>& annotations);

}  // namespace symstream
