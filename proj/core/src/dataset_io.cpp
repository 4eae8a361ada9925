#include "drivegaze/dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace drivegaze {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (split_csv_line(line) != header) throw FormatError(path.string() + ": unexpected header '" + line + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw FormatError(path.string() + ": expected " + std::to_string(header.size()) + " fields in '" + line + "'");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::size_t parse_size(const std::string& s, const fs::path& where) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw FormatError(where.string() + ": bad integer '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const fs::path& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(where.string() + ": bad number '" + s + "'");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

const std::vector<std::string> kSequenceHeader{"frame_index", "speed_kmh", "landscape", "frame_path", "map_path", "seg_path"};
const std::vector<std::string> kManifestHeader{"sequence_id", "landscape", "frames", "height", "width"};
const std::vector<std::string> kTruthHeader{"frame_index", "vanishing_y", "vanishing_x", "gaze_y", "gaze_x", "spread", "event"};

}  // namespace

std::vector<FrameRecord> read_sequence_csv(const fs::path& path) {
  std::vector<FrameRecord> records;
  for (auto& row : read_csv(path, kSequenceHeader)) {
    FrameRecord r;
    r.frame_index = parse_size(row[0], path);
    r.speed_kmh = parse_double(row[1], path);
    if (r.speed_kmh < 0.0) throw FormatError(path.string() + ": negative speed");
    r.landscape = parse_landscape(row[2]);
    r.frame_path = row[3];
    r.map_path = row[4];
    r.seg_path = row[5];
    if (r.frame_index != records.size()) throw FormatError(path.string() + ": frame_index must count up from 0");
    records.push_back(std::move(r));
  }
  return records;
}

void write_sequence_csv(const fs::path& path, const std::vector<FrameRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "frame_index,speed_kmh,landscape,frame_path,map_path,seg_path\n";
  for (const auto& r : records) {
    out << r.frame_index << ',' << fmt(r.speed_kmh) << ',' << to_string(r.landscape) << ',' << r.frame_path << ','
        << r.map_path << ',' << r.seg_path << '\n';
  }
}

std::vector<ManifestRow> read_manifest(const fs::path& root) {
  const fs::path path = root / "manifest.csv";
  std::vector<ManifestRow> rows;
  for (auto& row : read_csv(path, kManifestHeader)) {
    rows.push_back({row[0], parse_landscape(row[1]), parse_size(row[2], path), parse_size(row[3], path),
                    parse_size(row[4], path)});
  }
  return rows;
}

void write_sequence(const fs::path& root, const Sequence& sequence) {
  const fs::path dir = root / sequence.id;
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "maps");
  if (sequence.has_segmentation()) fs::create_directories(dir / "seg");
  for (std::size_t i = 0; i < sequence.length(); ++i) {
    const auto& rec = sequence.records[i];
    write_tensor(dir / rec.frame_path, sequence.frames[i]);
    write_tensor(dir / rec.map_path, sequence.maps[i]);
    if (sequence.has_segmentation()) write_labels(dir / rec.seg_path, sequence.segmentation[i]);
  }
  write_sequence_csv(dir / "sequence.csv", sequence.records);
}

void write_truth(const fs::path& root, const std::string& sequence_id, const SynthTruth& truth) {
  std::ofstream out(root / sequence_id / "truth.csv", std::ios::trunc);
  if (!out) throw FormatError("cannot write truth for " + sequence_id);
  out << "frame_index,vanishing_y,vanishing_x,gaze_y,gaze_x,spread,event\n";
  for (std::size_t i = 0; i < truth.event.size(); ++i) {
    out << i << ',' << fmt(truth.vanishing_y[i]) << ',' << fmt(truth.vanishing_x[i]) << ',' << fmt(truth.gaze_y[i])
        << ',' << fmt(truth.gaze_x[i]) << ',' << fmt(truth.spread[i]) << ',' << (truth.event[i] ? 1 : 0) << '\n';
  }
}

void write_dataset(const fs::path& root, const std::vector<SynthSequence>& sequences) {
  fs::create_directories(root);
  std::ofstream manifest(root / "manifest.csv", std::ios::trunc);
  if (!manifest) throw FormatError("cannot write " + (root / "manifest.csv").string());
  manifest << "sequence_id,landscape,frames,height,width\n";
  for (const auto& s : sequences) {
    write_sequence(root, s.sequence);
    write_truth(root, s.sequence.id, s.truth);
    const Landscape landscape = s.sequence.records.empty() ? Landscape::Downtown : s.sequence.records.front().landscape;
    manifest << s.sequence.id << ',' << to_string(landscape) << ',' << s.sequence.length() << ','
             << s.sequence.height() << ',' << s.sequence.width() << '\n';
  }
}

std::vector<Sequence> read_dataset(const fs::path& root, const LoadOptions& options, std::vector<std::string>* warnings) {
  if (!fs::is_directory(root)) throw FormatError("dataset root " + root.string() + " does not exist");
  std::vector<Sequence> sequences;
  for (const auto& row : read_manifest(root)) {
    const fs::path dir = root / row.sequence_id;
    Sequence seq;
    seq.id = row.sequence_id;
    seq.records = read_sequence_csv(dir / "sequence.csv");
    if (seq.records.size() != row.frames) {
      throw FormatError("sequence " + seq.id + ": manifest lists " + std::to_string(row.frames) + " frames, CSV has " +
                        std::to_string(seq.records.size()));
    }
    bool segmentation = options.load_segmentation;
    for (const auto& rec : seq.records) {
      Tensor frame = read_tensor(dir / rec.frame_path);
      Tensor map = read_tensor(dir / rec.map_path);
      if (frame.shape() != Shape{3, row.height, row.width} || map.shape() != Shape{1, row.height, row.width}) {
        throw FormatError("sequence " + seq.id + ": frame " + std::to_string(rec.frame_index) + " has wrong shape");
      }
      seq.frames.push_back(std::move(frame));
      seq.maps.push_back(std::move(map));
      if (segmentation) {
        const fs::path seg = dir / rec.seg_path;
        if (rec.seg_path.empty() || !fs::exists(seg)) {
          segmentation = false;
          seq.segmentation.clear();
          if (warnings) warnings->push_back("sequence " + seq.id + ": segmentation maps missing");
          continue;
        }
        seq.segmentation.push_back(read_labels(seg));
      }
    }
    sequences.push_back(std::move(seq));
  }
  return sequences;
}

std::vector<bool> read_event_truth(const fs::path& root, const std::string& sequence_id) {
  const fs::path path = root / sequence_id / "truth.csv";
  std::vector<bool> events;
  if (!fs::exists(path)) return events;
  for (auto& row : read_csv(path, kTruthHeader)) events.push_back(row[6] == "1");
  return events;
}

}  // namespace drivegaze
