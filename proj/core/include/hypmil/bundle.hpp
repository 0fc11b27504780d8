#pragma once

// Feature bundle files: a JSON manifest plus a little-endian float32 payload.
//
// Payload layout: "HPFB1" (5 bytes), u32 version, then for each slide in
// manifest order its regions' row-major [patches x dim] matrices. Each
// manifest slide entry records its region patch counts and the byte offset
// of its first value within the payload file.

#include <string>

#include "hypmil/data.hpp"

namespace hypmil::data {

inline constexpr char kBundleMagic[] = "HPFB1";
inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::uint32_t kManifestSchemaVersion = 1;

// Payload path used for a manifest path: the extension replaced by ".bin".
std::string payload_path_for(const std::string& manifest_path);

void write_bundle(const FeatureBundle& bundle, const std::string& manifest_path);

// Errors: kIo, kManifest (unparsable or inconsistent manifest), kBadMagic,
// kVersionMismatch, kTruncated (payload shorter than its header) and
// kPayloadLength (data section size disagrees with the manifest).
FeatureBundle read_bundle(const std::string& manifest_path);

}  // namespace hypmil::data
