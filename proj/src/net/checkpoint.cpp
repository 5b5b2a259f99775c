// SPDX-License-Identifier: Apache-2.0

#include "scd/net/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <map>

namespace fs = std::filesystem;
using nlohmann::json;

namespace scd::net {
namespace {

constexpr char kMagic[8] = {'S', 'C', 'D', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename Scalar>
constexpr const char* dtype_name() {
  return sizeof(Scalar) == 4 ? "float32" : "float64";
}

json spec_to_json(const BackboneSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) layers.push_back({{"name", l.name}, {"out_channels", l.out_channels}, {"stride", l.stride}});
  return {{"family", to_string(spec.family)},
          {"input_channels", spec.input_channels},
          {"tap_layer", spec.tap_layer},
          {"total_layers", spec.total_layers()},
          {"layers", layers}};
}

BackboneSpec spec_from_json(const json& j) {
  BackboneSpec spec;
  spec.family = backbone_family_from_string(j.at("family").get<std::string>());
  spec.input_channels = j.at("input_channels").get<int>();
  spec.tap_layer = j.at("tap_layer").get<int>();
  for (const auto& l : j.at("layers"))
    spec.layers.push_back({l.at("name").get<std::string>(), l.at("out_channels").get<int>(), l.at("stride").get<int>()});
  return spec;
}

template <typename Scalar>
std::vector<std::pair<std::string, const Conv2d<Scalar>*>> named_parameters(const ChangeModel<Scalar>& model) {
  std::vector<std::pair<std::string, const Conv2d<Scalar>*>> out;
  for (const auto& l : model.encoder(EncoderBranch::a).layers) out.emplace_back("encoder_a." + l.name, &l);
  if (!model.encoders_shared())
    for (const auto& l : model.encoder(EncoderBranch::b).layers) out.emplace_back("encoder_b." + l.name, &l);
  const auto params = model.parameters();
  const std::size_t dec = out.size();
  for (std::size_t i = dec; i < params.size(); ++i) out.emplace_back("decoder." + params[i]->name, params[i]);
  return out;
}

template <typename Stored, typename Scalar, typename Derived>
void read_into(const char* src, Eigen::PlainObjectBase<Derived>& dst) {
  Eigen::Map<const Eigen::Matrix<Stored, Eigen::Dynamic, 1>> view(reinterpret_cast<const Stored*>(src), dst.size());
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(dst.data(), dst.size()) = view.template cast<Scalar>();
}

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw LoadError("missing file: " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<char> bytes(size);
  in.seekg(0);
  in.read(bytes.data(), static_cast<std::streamsize>(size));
  if (!in) throw LoadError("cannot read " + path.string());
  return bytes;
}

} // namespace

template <typename Scalar>
void save_checkpoint(const ChangeModel<Scalar>& model, const fs::path& path) {
  json tensors = json::array();
  std::size_t payload = 0;
  const auto named = named_parameters(model);
  for (const auto& [name, conv] : named) {
    tensors.push_back({{"name", name + ".weight"}, {"shape", {conv->weight.rows(), conv->weight.cols()}}});
    tensors.push_back({{"name", name + ".bias"}, {"shape", {conv->bias.size()}}});
    payload += static_cast<std::size_t>(conv->parameter_count()) * sizeof(Scalar);
  }
  const json header = {{"format_version", kCheckpointVersion},
                       {"dtype", dtype_name<Scalar>()},
                       {"backbone", spec_to_json(model.spec())},
                       {"decoder_widths", model.decoder_widths()},
                       {"weight_tying", to_string(model.weight_tying())},
                       {"trainable_tail_k", model.trainable_tail_k()},
                       {"tensors", tensors},
                       {"payload_bytes", payload}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, conv] : named) {
    out.write(reinterpret_cast<const char*>(conv->weight.data()), static_cast<std::streamsize>(conv->weight.size() * sizeof(Scalar)));
    out.write(reinterpret_cast<const char*>(conv->bias.data()), static_cast<std::streamsize>(conv->bias.size() * sizeof(Scalar)));
  }
  if (!out) throw IoError("cannot write " + path.string());
}

template <typename Scalar>
ChangeModel<Scalar> load_checkpoint(const fs::path& path) {
  const std::vector<char> bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw LoadError(path.string() + " is not a checkpoint (bad magic or truncated)");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (len > bytes.size() - 16) throw LoadError(path.string() + ": truncated header");

  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": corrupt header: " + e.what());
  }

  try {
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw VersionError(path.string() + ": checkpoint format_version " + std::to_string(version) + ", expected " +
                         std::to_string(kCheckpointVersion));
    const std::string dtype = header.at("dtype").get<std::string>();
    if (dtype != "float32" && dtype != "float64") throw LoadError(path.string() + ": unknown dtype " + dtype);
    const std::size_t elem = dtype == "float32" ? 4 : 8;

    typename ChangeModel<Scalar>::Parts parts;
    parts.spec = spec_from_json(header.at("backbone"));
    parts.tying = weight_tying_from_string(header.at("weight_tying").get<std::string>());
    parts.trainable_tail_k = header.at("trainable_tail_k").get<int>();
    parts.decoder_widths = header.at("decoder_widths").get<std::vector<int>>();
    ChangeModel<Scalar> model = ChangeModel<Scalar>::from_parts(parts);

    std::map<std::string, std::vector<std::int64_t>> shapes;
    for (const auto& t : header.at("tensors")) shapes[t.at("name").get<std::string>()] = t.at("shape").get<std::vector<std::int64_t>>();

    std::size_t offset = 16 + len;
    auto params = model.parameters();
    const auto named = named_parameters(model);
    if (named.size() != params.size() || shapes.size() != 2 * named.size())
      throw LoadError(path.string() + ": tensor list does not match the stored architecture");
    for (std::size_t i = 0; i < named.size(); ++i) {
      Conv2d<Scalar>& conv = *params[i];
      const auto& ws = shapes.at(named[i].first + ".weight");
      const auto& bs = shapes.at(named[i].first + ".bias");
      if (ws.size() != 2 || ws[0] != conv.weight.rows() || ws[1] != conv.weight.cols() || bs.size() != 1 ||
          bs[0] != conv.bias.size())
        throw LoadError(path.string() + ": shape mismatch for " + named[i].first);
      const std::size_t need = static_cast<std::size_t>(conv.parameter_count()) * elem;
      if (offset + need > bytes.size()) throw LoadError(path.string() + ": truncated payload");
      if (elem == 4) {
        read_into<float, Scalar>(bytes.data() + offset, conv.weight);
        read_into<float, Scalar>(bytes.data() + offset + conv.weight.size() * 4, conv.bias);
      } else {
        read_into<double, Scalar>(bytes.data() + offset, conv.weight);
        read_into<double, Scalar>(bytes.data() + offset + conv.weight.size() * 8, conv.bias);
      }
      offset += need;
    }
    if (offset != bytes.size()) throw LoadError(path.string() + ": trailing bytes after payload");
    return model;
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": corrupt header: " + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(path.string() + ": invalid stored configuration: " + e.what());
  }
}

template <typename Scalar>
int import_pretrained(ChangeModel<Scalar>& model, const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw LoadError("missing file: " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("cannot parse weight manifest " + manifest_path.string() + ": " + e.what());
  }
  if (doc.value("format_version", 0) != 1)
    throw VersionError(manifest_path.string() + ": unsupported weight manifest version");

  const fs::path root = manifest_path.parent_path();
  auto load_array = [&](const std::string& rel, Eigen::Index count) {
    const std::vector<char> bytes = read_file(root / rel);
    if (bytes.size() != static_cast<std::size_t>(count) * 4)
      throw FormatError((root / rel).string() + ": expected " + std::to_string(count) + " float32 values");
    Vector<Scalar> v(count);
    read_into<float, Scalar>(bytes.data(), v);
    return v;
  };

  int imported = 0;
  for (const auto& entry : doc.at("layers")) {
    const std::string name = entry.at("name").get<std::string>();
    for (auto branch : {EncoderBranch::a, EncoderBranch::b}) {
      if (branch == EncoderBranch::b && model.encoders_shared()) break;
      for (auto& conv : model.mutable_encoder(branch).layers) {
        if (conv.name != name) continue;
        const Vector<Scalar> w = load_array(entry.at("weight").get<std::string>(), conv.weight.size());
        conv.weight = Eigen::Map<const Matrix<Scalar>>(w.data(), conv.weight.rows(), conv.weight.cols());
        conv.bias = load_array(entry.at("bias").get<std::string>(), conv.bias.size());
        if (branch == EncoderBranch::a) ++imported;
      }
    }
  }
  return imported;
}

template void save_checkpoint(const ChangeModel<float>&, const fs::path&);
template void save_checkpoint(const ChangeModel<double>&, const fs::path&);
template ChangeModel<float> load_checkpoint(const fs::path&);
template ChangeModel<double> load_checkpoint(const fs::path&);
template int import_pretrained(ChangeModel<float>&, const fs::path&);
template int import_pretrained(ChangeModel<double>&, const fs::path&);

} // namespace scd::net
