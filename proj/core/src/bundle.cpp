#include "hypmil/bundle.hpp"

#include <filesystem>

#include "hypmil/error.hpp"
#include "hypmil/io_util.hpp"
#include "json.hpp"

namespace hypmil::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kMagicLen = 5;
constexpr std::size_t kHeaderLen = kMagicLen + 4;

}  // namespace

std::string payload_path_for(const std::string& manifest_path) {
  fs::path p(manifest_path);
  p.replace_extension(".bin");
  return p.string();
}

void write_bundle(const FeatureBundle& bundle, const std::string& manifest_path) {
  bundle.validate();
  const std::string payload_path = payload_path_for(manifest_path);
  if (payload_path == manifest_path) {
    throw Error(ErrorCode::kInvalidArgument, "manifest path must not end in .bin");
  }

  io::ByteWriter payload;
  payload.bytes(std::string_view(kBundleMagic, kMagicLen));
  payload.u32(kBundleVersion);

  json slides = json::array();
  for (const auto& bag : bundle.bags) {
    json counts = json::array();
    for (std::size_t r = 0; r < bag.num_regions(); ++r) counts.push_back(bag.patches_in(r));
    slides.push_back({{"id", bag.slide_id},
                      {"label", bag.label},
                      {"site", bag.site},
                      {"region_patches", counts},
                      {"offset", payload.data().size()}});
    for (const auto& region : bag.regions)
      for (float v : region) payload.f32(v);
  }

  json semantics = json::array();
  for (const auto& row : bundle.class_semantics) {
    json r = json::array();
    for (float v : row) r.push_back(static_cast<double>(v));
    semantics.push_back(std::move(r));
  }

  json manifest = {{"schema_version", kManifestSchemaVersion},
                   {"dim", bundle.dim},
                   {"payload", fs::path(payload_path).filename().string()},
                   {"classes", bundle.class_names},
                   {"class_semantics", semantics},
                   {"slides", slides}};

  io::write_file_atomic(payload_path, payload.data());
  io::write_file_atomic(manifest_path, manifest.dump(1) + "\n");
}

FeatureBundle read_bundle(const std::string& manifest_path) {
  json manifest;
  try {
    manifest = json::parse(io::read_file(manifest_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kManifest, "cannot parse '" + manifest_path + "': " + e.what());
  }

  FeatureBundle bundle;
  fs::path payload_path;
  try {
    if (manifest.at("schema_version").get<std::uint32_t>() != kManifestSchemaVersion) {
      throw Error(ErrorCode::kVersionMismatch,
                  "manifest schema version " + manifest.at("schema_version").dump() + " is not supported");
    }
    bundle.dim = manifest.at("dim").get<std::size_t>();
    bundle.class_names = manifest.at("classes").get<std::vector<std::string>>();
    for (const auto& row : manifest.at("class_semantics")) {
      std::vector<float> r;
      for (const auto& v : row) r.push_back(static_cast<float>(v.get<double>()));
      bundle.class_semantics.push_back(std::move(r));
    }
    payload_path = fs::path(manifest_path).parent_path() / manifest.at("payload").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kManifest, std::string("malformed manifest: ") + e.what());
  }

  const std::string payload = io::read_file(payload_path.string());
  if (payload.size() < kHeaderLen) {
    throw Error(ErrorCode::kTruncated, "payload '" + payload_path.string() + "' ends inside its header");
  }
  io::ByteReader in(payload);
  if (in.bytes(kMagicLen) != std::string_view(kBundleMagic, kMagicLen)) {
    throw Error(ErrorCode::kBadMagic, "payload '" + payload_path.string() + "' does not start with HPFB1");
  }
  if (const auto v = in.u32(); v != kBundleVersion) {
    throw Error(ErrorCode::kVersionMismatch, "payload version " + std::to_string(v) + " is not supported");
  }

  // Check the declared layout against the payload size before reading.
  std::size_t expected = kHeaderLen;
  try {
    for (const auto& s : manifest.at("slides")) {
      if (s.at("offset").get<std::size_t>() != expected) {
        throw Error(ErrorCode::kManifest, "slide '" + s.at("id").get<std::string>() + "' offset " +
                                              s.at("offset").dump() + " disagrees with layout (expected " +
                                              std::to_string(expected) + ")");
      }
      for (const auto& c : s.at("region_patches")) expected += c.get<std::size_t>() * bundle.dim * sizeof(float);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kManifest, std::string("malformed slide entry: ") + e.what());
  }
  if (expected != payload.size()) {
    throw Error(ErrorCode::kPayloadLength, "manifest declares " + std::to_string(expected - kHeaderLen) +
                                               " data bytes, payload holds " +
                                               std::to_string(payload.size() - kHeaderLen));
  }

  for (const auto& s : manifest.at("slides")) {
    FeatureBag bag;
    bag.slide_id = s.at("id").get<std::string>();
    bag.label = s.at("label").get<std::size_t>();
    bag.site = s.at("site").get<std::string>();
    bag.dim = bundle.dim;
    for (const auto& c : s.at("region_patches")) {
      std::vector<float> m(c.get<std::size_t>() * bundle.dim);
      for (auto& v : m) v = in.f32();
      bag.regions.push_back(std::move(m));
    }
    bundle.bags.push_back(std::move(bag));
  }
  bundle.validate();
  return bundle;
}

}  // namespace hypmil::data
