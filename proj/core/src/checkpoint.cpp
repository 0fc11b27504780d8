#include "hypmil/checkpoint.hpp"

#include <map>

#include "hypmil/error.hpp"
#include "hypmil/io_util.hpp"

namespace hypmil::model {

namespace {

constexpr std::size_t kMagicLen = 5;

}  // namespace

std::string encode_checkpoint(const ModelParams& params) {
  io::ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, kMagicLen));
  w.u32(kCheckpointVersion);
  const auto tensors = params.named_tensors();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t->rank()));
    for (auto d : t->shape()) w.u64(d);
    for (double v : t->values()) w.f64(v);
  }
  return w.take();
}

ModelParams decode_checkpoint(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < kMagicLen) throw Error(ErrorCode::kTruncated, "checkpoint shorter than its magic");
  if (r.bytes(kMagicLen) != std::string_view(kCheckpointMagic, kMagicLen)) {
    throw Error(ErrorCode::kBadMagic, "checkpoint does not start with HPCK1");
  }
  if (auto v = r.u32(); v != kCheckpointVersion) {
    throw Error(ErrorCode::kVersionMismatch, "checkpoint version " + std::to_string(v) + " is not supported");
  }
  const std::uint32_t count = r.u32();
  std::map<std::string, ad::Tensor> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    std::string name(r.bytes(len));
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw Error(ErrorCode::kManifest, "record '" + name + "' has implausible rank");
    ad::Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = r.u64();
      n *= d;
    }
    if (n * 8 > r.remaining()) {
      throw Error(ErrorCode::kTruncated, "record '" + name + "' payload runs past the end of the file");
    }
    std::vector<double> values(n);
    for (auto& v : values) v = r.f64();
    records.emplace(std::move(name), ad::Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) throw Error(ErrorCode::kManifest, "trailing bytes after the last checkpoint record");

  auto take = [&](const std::string& name) -> ad::Tensor {
    auto it = records.find(name);
    if (it == records.end()) throw Error(ErrorCode::kManifest, "checkpoint is missing record '" + name + "'");
    ad::Tensor t = std::move(it->second);
    records.erase(it);
    return t;
  };

  ModelParams p;
  p.dims.shared_aggregator = records.find("agg_region_slide.w1") == records.end();
  for (auto& [name, tensor] : p.named_tensors()) *tensor = take(name);
  if (!records.empty()) throw Error(ErrorCode::kManifest, "unknown checkpoint record '" + records.begin()->first + "'");

  const auto& w1 = p.adaptor_image.w1;
  const auto& w2 = p.adaptor_image.w2;
  const auto& base = p.class_semantics.base;
  if (w1.rank() != 2 || w2.rank() != 2 || base.rank() != 2) {
    throw Error(ErrorCode::kManifest, "checkpoint tensors have unexpected ranks");
  }
  p.dims.input_dim = w1.dim(1);
  p.dims.hidden_dim = w1.dim(0);
  p.dims.embed_dim = w2.dim(0);
  p.dims.num_classes = base.dim(0);
  p.dims.validate();
  return p;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  io::write_file_atomic(path, encode_checkpoint(params));
}

ModelParams load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace hypmil::model
