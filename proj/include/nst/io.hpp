#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nst/graph.hpp"
#include "nst/training.hpp"

namespace nst::io {

using json = nlohmann::ordered_json;

// Shortest exact decimal form (%.17g-style round trip).
std::string format_double(double v);
// Bit-exact hex-float form used by checkpoints.
std::string hex_double(double v);
double parse_double(const std::string& s);

// Edge list: one "u<TAB>v<TAB>w" per line, 0-based ids.
void write_edge_list(const std::filesystem::path& path, const graph::WeightedDigraph& g);
std::vector<graph::Edge> read_edge_list(const std::filesystem::path& path);

// Feature CSV: row i holds the features of node i.
void write_features_csv(const std::filesystem::path& path, const Mat& features);
Mat read_features_csv(const std::filesystem::path& path);

json graph_to_json(const graph::WeightedDigraph& g);
void write_graph_json(const std::filesystem::path& path, const graph::WeightedDigraph& g);

// Writes edges.tsv, features.csv and graph.json into `dir`.
void save_graph_dir(const std::filesystem::path& dir, const graph::WeightedDigraph& g);
// Loads a graph from a directory (edges.tsv plus optional features.csv) or
// from a bare edge-list file. clamp_weights, when positive, clamps loaded
// weights into [clamp_weights, 1] (cosine-similarity ingestion guard).
graph::WeightedDigraph load_graph(const std::filesystem::path& path, double clamp_weights = 0.0);

json config_to_json(const train::TrainConfig& cfg);
train::TrainConfig config_from_json(const json& j);

// Checkpoints round-trip bit-exactly: every value is a hex float.
json model_to_json(const train::Model& model, const train::TrainConfig& cfg);
train::Model model_from_json(const json& j, train::TrainConfig* cfg_out = nullptr);
void save_checkpoint(const std::filesystem::path& path, const train::Model& model,
                     const train::TrainConfig& cfg);
train::Model load_checkpoint(const std::filesystem::path& path,
                             train::TrainConfig* cfg_out = nullptr);

json report_to_json(const train::EmbeddingReport& report);
void write_report(const std::filesystem::path& path, const train::EmbeddingReport& report);

// epoch,distance_loss,causality_loss,total_correct
void write_curve_csv(const std::filesystem::path& path,
                     const std::vector<train::CurvePoint>& curve);

void write_manifest(const std::filesystem::path& path, const json& manifest);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace nst::io
