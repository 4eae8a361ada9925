#pragma once

// On-disk dataset layout:
//
//   <root>/manifest.csv                  sequence_id,landscape,frames,height,width
//   <root>/<id>/sequence.csv             frame_index,speed_kmh,landscape,frame_path,map_path,seg_path
//   <root>/<id>/frames/NNNNNN.drvt       3 x H x W float32
//   <root>/<id>/maps/NNNNNN.drvt         1 x H x W float32
//   <root>/<id>/seg/NNNNNN.drvt          H x W uint8 category ids
//   <root>/<id>/truth.csv                planted truth (synthetic data only)
//
// Paths inside sequence.csv are relative to the sequence directory.

#include <filesystem>
#include <string>
#include <vector>

#include "drivegaze/clip.hpp"
#include "drivegaze/synth.hpp"

namespace drivegaze {

struct ManifestRow {
  std::string sequence_id;
  Landscape landscape = Landscape::Downtown;
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

std::vector<FrameRecord> read_sequence_csv(const std::filesystem::path& path);
void write_sequence_csv(const std::filesystem::path& path, const std::vector<FrameRecord>& records);

std::vector<ManifestRow> read_manifest(const std::filesystem::path& root);

void write_sequence(const std::filesystem::path& root, const Sequence& sequence);
void write_truth(const std::filesystem::path& root, const std::string& sequence_id, const SynthTruth& truth);
void write_dataset(const std::filesystem::path& root, const std::vector<SynthSequence>& sequences);

struct LoadOptions {
  bool load_segmentation = true;
};

/// Loads every sequence listed in the manifest. Missing segmentation files
/// leave Sequence::segmentation empty and append a warning.
std::vector<Sequence> read_dataset(const std::filesystem::path& root, const LoadOptions& options,
                                   std::vector<std::string>* warnings = nullptr);

/// Planted event flags per frame from truth.csv; empty when absent.
std::vector<bool> read_event_truth(const std::filesystem::path& root, const std::string& sequence_id);

}  // namespace drivegaze
