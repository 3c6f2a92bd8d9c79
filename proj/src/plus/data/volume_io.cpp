#include "plus/data/volume_io.hpp"

#include <fstream>

#include <json.hpp>

namespace plus::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  return out;
}

std::ifstream open_in(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read " + file.string());
  return in;
}

}  // namespace

const std::vector<std::string>& Manifest::ids(const std::string& split) const {
  auto it = splits.find(split);
  if (it == splits.end()) throw DataError("manifest has no split named '" + split + "'");
  return it->second;
}

void write_f32_raw(const fs::path& file, const FloatVol& vol) {
  auto out = open_out(file);
  out.write(reinterpret_cast<const char*>(vol.v.data()),
            static_cast<std::streamsize>(vol.v.size() * sizeof(float)));
}

FloatVol read_f32_raw(const fs::path& file, std::array<std::int64_t, 3> dims,
                      std::array<double, 3> spacing) {
  FloatVol vol;
  vol.dims = dims;
  vol.spacing = spacing;
  vol.v.resize(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]));
  auto in = open_in(file);
  in.read(reinterpret_cast<char*>(vol.v.data()),
          static_cast<std::streamsize>(vol.v.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(vol.v.size() * sizeof(float))) {
    throw DataError("short read from " + file.string());
  }
  return vol;
}

void write_mask_raw(const fs::path& file, const ByteVol& mask) {
  auto out = open_out(file);
  out.write(reinterpret_cast<const char*>(mask.v.data()),
            static_cast<std::streamsize>(mask.v.size()));
}

ByteVol read_mask_raw(const fs::path& file, std::array<std::int64_t, 3> dims) {
  ByteVol mask;
  mask.dims = dims;
  mask.v.resize(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]));
  auto in = open_in(file);
  in.read(reinterpret_cast<char*>(mask.v.data()), static_cast<std::streamsize>(mask.v.size()));
  if (in.gcount() != static_cast<std::streamsize>(mask.v.size())) {
    throw DataError("short read from " + file.string());
  }
  return mask;
}

void save_case(const fs::path& root, const PatientCase& pc, const std::string& split) {
  const auto dir = root / pc.id;
  fs::create_directories(dir);
  write_f32_raw(dir / "volume.raw", pc.volume);
  write_mask_raw(dir / "liver_mask.raw", pc.liver);
  json lesions = json::array();
  for (std::size_t k = 0; k < pc.lesions.size(); ++k) {
    const auto file = "lesion_" + std::to_string(k) + ".raw";
    write_mask_raw(dir / file, pc.lesions[k].mask);
    lesions.push_back({{"file", file},
                       {"class", pc.lesions[k].cls},
                       {"malignant", pc.lesions[k].malignant}});
  }
  json meta = {
      {"id", pc.id},
      {"shape", {pc.volume.dims[0], pc.volume.dims[1], pc.volume.dims[2]}},
      {"spacing", {pc.volume.spacing[0], pc.volume.spacing[1], pc.volume.spacing[2]}},
      {"condition", condition_name(pc.condition)},
      {"lesions", lesions},
      {"labels", {{"has_malignant", pc.has_malignant}, {"has_tumor", pc.has_tumor}}},
      {"split", split},
      {"generator_seed", pc.seed},
  };
  auto out = open_out(dir / "meta.json");
  out << meta.dump(2) << "\n";
}

PatientCase load_case(const fs::path& root, const std::string& id) {
  const auto dir = root / id;
  json meta;
  {
    auto in = open_in(dir / "meta.json");
    in >> meta;
  }
  PatientCase pc;
  pc.id = meta.at("id").get<std::string>();
  std::array<std::int64_t, 3> dims{};
  for (int i = 0; i < 3; ++i) dims[i] = meta.at("shape")[i].get<std::int64_t>();
  std::array<double, 3> spacing{};
  for (int i = 0; i < 3; ++i) spacing[i] = meta.at("spacing")[i].get<double>();
  pc.volume = read_f32_raw(dir / "volume.raw", dims, spacing);
  pc.liver = read_mask_raw(dir / "liver_mask.raw", dims);
  pc.condition = condition_from_name(meta.at("condition").get<std::string>());
  for (const auto& l : meta.at("lesions")) {
    Lesion les;
    les.mask = read_mask_raw(dir / l.at("file").get<std::string>(), dims);
    les.cls = l.at("class").get<int>();
    les.malignant = l.at("malignant").get<bool>();
    pc.lesions.push_back(std::move(les));
  }
  pc.has_malignant = meta.at("labels").at("has_malignant").get<bool>();
  pc.has_tumor = meta.at("labels").at("has_tumor").get<bool>();
  pc.seed = meta.at("generator_seed").get<std::uint64_t>();
  return pc;
}

void save_manifest(const fs::path& root, const Manifest& manifest) {
  json splits;
  for (const auto& [name, ids] : manifest.splits) splits[name] = ids;
  json doc = {{"splits", splits}};
  auto out = open_out(root / "manifest.json");
  out << doc.dump(2) << "\n";
}

Manifest load_manifest(const fs::path& root) {
  json doc;
  {
    auto in = open_in(root / "manifest.json");
    in >> doc;
  }
  Manifest m;
  for (const auto& [name, ids] : doc.at("splits").items()) {
    m.splits[name] = ids.get<std::vector<std::string>>();
  }
  return m;
}

}  // namespace plus::data
