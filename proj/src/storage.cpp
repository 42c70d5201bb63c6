#include "moldsynth/storage.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

namespace moldsynth {

using nlohmann::json;

namespace {

std::string at(const fs::path& path, size_t line, size_t column) {
  return path.string() + ":" + std::to_string(line) + ":" + std::to_string(column);
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

void check_id(const std::string& id) {
  if (id.empty()) throw DataError("empty cycle_id");
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    if (!ok) throw DataError("cycle_id '" + id + "' contains characters not allowed in file names");
  }
}

json quality_json(const QualityIndicators& q) {
  return {{"fill_fraction", q.fill_fraction},
          {"peak_cavity_pressure", q.peak_cavity_pressure},
          {"min_cushion", q.min_cushion}};
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_cycle(const CycleRecord& record, const fs::path& path) {
  const auto violations = validate_cycle(record);
  if (!violations.empty()) throw DataError("write_cycle " + record.cycle_id + ": " + violations.front().what);
  const auto& schema = FeatureSchema::canonical();
  std::string text;
  text.reserve(static_cast<size_t>(record.samples.size()) * 12);
  for (int c = 0; c < schema.size(); ++c) {
    if (c) text += ',';
    text += schema[c].name;
  }
  text += '\n';
  for (Eigen::Index r = 0; r < record.samples.rows(); ++r) {
    for (Eigen::Index c = 0; c < record.samples.cols(); ++c) {
      if (c) text += ',';
      text += format_double(record.samples(r, c));
    }
    text += '\n';
  }
  write_text_file(path, text);
}

CycleRecord read_cycle(const fs::path& path, const FeatureSchema& schema) {
  const std::string text = read_text_file(path);
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const size_t nl = rest.find('\n');
      std::string_view line = rest.substr(0, nl);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  if (lines.empty()) throw DataError(path.string() + ": empty file");

  const auto header = split_row(lines[0]);
  for (int c = 0; c < schema.size(); ++c) {
    if (static_cast<size_t>(c) >= header.size()) {
      throw DataError(at(path, 1, static_cast<size_t>(c) + 1) + ": header is missing column '" +
                      std::string(schema[c].name) + "'");
    }
    if (header[static_cast<size_t>(c)] != schema[c].name) {
      throw DataError(at(path, 1, static_cast<size_t>(c) + 1) + ": expected column '" + std::string(schema[c].name) +
                      "', found '" + std::string(header[static_cast<size_t>(c)]) + "'");
    }
  }
  if (header.size() > static_cast<size_t>(schema.size())) {
    throw DataError(at(path, 1, static_cast<size_t>(schema.size()) + 1) + ": unexpected extra column '" +
                    std::string(header[static_cast<size_t>(schema.size())]) + "'");
  }

  CycleRecord rec;
  rec.cycle_id = path.stem().string();
  const size_t rows = lines.size() - 1;
  rec.samples.resize(static_cast<Eigen::Index>(rows), schema.size());
  for (size_t r = 0; r < rows; ++r) {
    const size_t line_no = r + 2;
    const auto cells = split_row(lines[r + 1]);
    if (cells.size() != static_cast<size_t>(schema.size())) {
      throw DataError(at(path, line_no, 1) + ": expected " + std::to_string(schema.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    for (size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const auto cell = cells[c];
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw DataError(at(path, line_no, c + 1) + ": cannot parse '" + std::string(cell) + "' as a number");
      }
      rec.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  if (rows > 0) {
    std::array<double, kNumSetpoints> sp{};
    for (int i = 0; i < kNumSetpoints; ++i) sp[static_cast<size_t>(i)] = rec.samples(0, kNumSignals + i);
    rec.setpoints = ProcessSetpoints::from_array(sp);
  }
  const auto violations = validate_cycle(rec, schema);
  if (!violations.empty()) throw DataError(path.string() + ": " + violations.front().what);
  return rec;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& dir) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json j = {{"cycle_id", e.cycle_id},
              {"file", e.file},
              {"label", to_string(e.label.value)},
              {"source", to_string(e.source)},
              {"sample_period_ms", e.sample_period_ms},
              {"T", e.length}};
    if (e.split) j["split"] = *e.split;
    if (e.quality) j["quality"] = quality_json(*e.quality);
    entries.push_back(std::move(j));
  }
  const json doc = {{"format_version", kManifestVersion},
                    {"name", manifest.name},
                    {"schema_fingerprint", manifest.schema_fingerprint},
                    {"entries", std::move(entries)}};
  write_text_file(dir / "manifest.json", doc.dump(2) + "\n");
}

DatasetManifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    if (doc.at("format_version").get<int>() != kManifestVersion) {
      throw DataError(path.string() + ": unsupported manifest format_version");
    }
    m.name = doc.at("name").get<std::string>();
    m.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    std::set<std::string> ids;
    for (const auto& j : doc.at("entries")) {
      ManifestEntry e;
      e.cycle_id = j.at("cycle_id").get<std::string>();
      e.file = j.at("file").get<std::string>();
      e.label = Label{parse_label(j.at("label").get<std::string>())};
      e.source = parse_source(j.at("source").get<std::string>());
      e.sample_period_ms = j.at("sample_period_ms").get<int>();
      e.length = j.at("T").get<long long>();
      if (j.contains("split")) e.split = j.at("split").get<std::string>();
      if (j.contains("quality")) {
        const auto& q = j.at("quality");
        e.quality = QualityIndicators{q.at("fill_fraction").get<double>(), q.at("peak_cavity_pressure").get<double>(),
                                      q.at("min_cushion").get<double>()};
      }
      if (!ids.insert(e.cycle_id).second) throw DataError(path.string() + ": duplicate cycle_id " + e.cycle_id);
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed manifest: " + e.what());
  }
  return m;
}

DatasetManifest write_dataset(const Dataset& dataset, const fs::path& dir, const std::optional<std::string>& split) {
  DatasetManifest m;
  m.name = dataset.name;
  m.schema_fingerprint = FeatureSchema::canonical().fingerprint();
  std::set<std::string> ids;
  for (const auto& r : dataset.records) {
    check_id(r.cycle_id);
    if (!ids.insert(r.cycle_id).second) throw DataError("duplicate cycle_id " + r.cycle_id);
    ManifestEntry e;
    e.cycle_id = r.cycle_id;
    e.file = "cycles/" + r.cycle_id + ".csv";
    e.label = r.label;
    e.source = r.source;
    e.sample_period_ms = r.sample_period_ms;
    e.length = r.samples.rows();
    e.split = split;
    e.quality = r.quality;
    write_cycle(r, dir / e.file);
    m.entries.push_back(std::move(e));
  }
  write_manifest(m, dir);
  return m;
}

Dataset read_dataset(const fs::path& dir, const FeatureSchema& schema) {
  const DatasetManifest m = read_manifest(dir);
  if (m.schema_fingerprint != schema.fingerprint()) {
    throw DataError("dataset " + dir.string() + " was written with schema " + m.schema_fingerprint +
                    ", incompatible with the current schema " + schema.fingerprint());
  }
  Dataset ds;
  ds.name = m.name;
  ds.records.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    const fs::path file = dir / e.file;
    if (!fs::exists(file)) {
      throw DataError("manifest entry " + e.cycle_id + " references missing file " + file.string());
    }
    CycleRecord r = read_cycle(file, schema);
    if (r.samples.rows() != e.length) {
      throw DataError("manifest entry " + e.cycle_id + ": T=" + std::to_string(e.length) + " but file has " +
                      std::to_string(r.samples.rows()) + " rows");
    }
    r.cycle_id = e.cycle_id;
    r.label = e.label;
    r.source = e.source;
    r.sample_period_ms = e.sample_period_ms;
    r.quality = e.quality;
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace moldsynth
