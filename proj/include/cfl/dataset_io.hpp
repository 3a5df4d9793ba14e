#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "cfl/measurement.hpp"

namespace cfl {

// Shortest-round-trip-safe rendering used in every emitted file.
std::string format_double(double x);

// CSV with header j0..j{d-1},omega_hat,stderr,T,t,mode.
std::string dataset_csv(const OmegaDataset& ds);
OmegaDataset parse_dataset_csv(const std::string& text, const BoxGrid& grid);

nlohmann::ordered_json dataset_sidecar(const OmegaDataset& ds);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Writes `<stem>.csv` and `<stem>.json`; `extra` is merged into the sidecar.
void write_dataset(const OmegaDataset& ds, const std::filesystem::path& csv_path,
                   const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());

// Reads a CSV and the sidecar next to it (same stem, .json).
OmegaDataset read_dataset(const std::filesystem::path& csv_path);

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace cfl
