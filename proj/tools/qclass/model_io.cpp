#include "qclass/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "qcnn/errors.hpp"
#include "qclass/config.hpp"

namespace qclass {

using nlohmann::json;
using qcnn::FormatError;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return v;
}

void put_f64(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_f64(std::string_view bytes, std::size_t at) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

json taxonomy_to_json(const qcnn::LabelTaxonomy& taxonomy) {
  json categories = json::array();
  for (std::size_t c = 0; c < taxonomy.coarse_count(); ++c) {
    categories.push_back({{"name", taxonomy.coarse_name(c)}, {"fine", taxonomy.fine_names(c)}});
  }
  return categories;
}

json shape_to_json(const qcnn::ModelShape& shape) {
  return {{"dim", shape.dim},
          {"heights", shape.heights},
          {"filters", shape.filters},
          {"hidden", shape.hidden},
          {"k", shape.k},
          {"classes", shape.classes},
          {"dropout", shape.dropout},
          {"conv_activation", std::string(qcnn::to_string(shape.conv_activation))}};
}

qcnn::ModelShape shape_from_json(const json& j) {
  qcnn::ModelShape shape;
  shape.dim = j.at("dim").get<std::size_t>();
  shape.heights = j.at("heights").get<std::vector<std::size_t>>();
  shape.filters = j.at("filters").get<std::size_t>();
  shape.hidden = j.at("hidden").get<std::size_t>();
  shape.k = j.at("k").get<std::size_t>();
  shape.classes = j.at("classes").get<std::size_t>();
  shape.dropout = j.at("dropout").get<double>();
  const auto act = qcnn::parse_activation(j.at("conv_activation").get<std::string>());
  if (!act) throw FormatError("model header: unknown conv_activation");
  shape.conv_activation = *act;
  return shape;
}

}  // namespace

bool same_labels(const qcnn::LabelTaxonomy& a, const qcnn::LabelTaxonomy& b) {
  if (a.coarse_names() != b.coarse_names()) return false;
  for (std::size_t c = 0; c < a.coarse_count(); ++c) {
    if (a.fine_names(c) != b.fine_names(c)) return false;
  }
  return true;
}

std::vector<std::string> ModelContainer::class_labels() const {
  return coarse ? taxonomy.fine_names(*coarse) : taxonomy.coarse_names();
}

std::string encode_model(const ModelContainer& container) {
  const auto& model = container.model;
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : qcnn::tensors(model)) {
    manifest.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"offset", offset}});
    offset += t.values.size() * sizeof(double);
  }
  json header = {
      {"role", container.coarse ? "tier2" : "tier1"},
      {"coarse", container.coarse ? json(container.taxonomy.coarse_name(*container.coarse))
                                  : json(nullptr)},
      {"classes", container.class_labels()},
      {"taxonomy", taxonomy_to_json(container.taxonomy)},
      {"shape", shape_to_json(model.shape)},
      {"training", config_to_map(container.config)},
      {"tensors", manifest},
      {"payload_bytes", offset},
  };
  const std::string header_text = header.dump(1);

  std::string out(kMagic, sizeof kMagic);
  out.push_back(static_cast<char>(kFormatVersion));
  put_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  out.reserve(out.size() + offset);
  for (const auto& t : qcnn::tensors(model)) {
    for (double v : t.values) put_f64(out, v);
  }
  return out;
}

ModelContainer decode_model(std::string_view bytes) {
  constexpr std::size_t kPrefix = sizeof kMagic + 1 + 4;
  if (bytes.size() < sizeof kMagic || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw FormatError("bad magic: not a QCNN model container");
  }
  if (bytes.size() < kPrefix) throw FormatError("truncated header: file ends inside the prefix");
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kFormatVersion) {
    throw FormatError("unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kFormatVersion) + ")");
  }
  const std::uint32_t header_len = get_u32(bytes, 5);
  if (bytes.size() - kPrefix < header_len) {
    throw FormatError("truncated header: expected " + std::to_string(header_len) +
                      " header bytes, got " + std::to_string(bytes.size() - kPrefix));
  }

  json header;
  try {
    header = json::parse(bytes.substr(kPrefix, header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("unreadable model header: ") + e.what());
  }

  ModelContainer container;
  try {
    std::vector<qcnn::LabelTaxonomy::Category> categories;
    const auto& standard = qcnn::LabelTaxonomy::standard();
    for (const auto& c : header.at("taxonomy")) {
      qcnn::LabelTaxonomy::Category cat;
      cat.name = c.at("name").get<std::string>();
      cat.fine = c.at("fine").get<std::vector<std::string>>();
      categories.push_back(std::move(cat));
    }
    container.taxonomy = qcnn::LabelTaxonomy(std::move(categories));
    // The header omits UIUC codes; restore them when the taxonomy is the standard one.
    if (same_labels(container.taxonomy, standard)) container.taxonomy = standard;

    const auto role = header.at("role").get<std::string>();
    if (role == "tier2") {
      const auto name = header.at("coarse").get<std::string>();
      const auto names = container.taxonomy.coarse_names();
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw FormatError("model header: unknown coarse category " + name);
      container.coarse = static_cast<std::size_t>(it - names.begin());
    } else if (role != "tier1") {
      throw FormatError("model header: unknown role " + role);
    }

    for (const auto& [key, value] : header.at("training").items()) {
      apply_config_value(container.config, key, value.get<std::string>());
    }
    container.model = qcnn::make_model(shape_from_json(header.at("shape")));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model header: ") + e.what());
  } catch (const qcnn::ConfigError& e) {
    throw FormatError(std::string("malformed model header: ") + e.what());
  }

  auto refs = qcnn::tensors(container.model);
  const auto& manifest = header.at("tensors");
  if (manifest.size() != refs.size()) {
    throw FormatError("tensor manifest lists " + std::to_string(manifest.size()) +
                      " tensors, model shape needs " + std::to_string(refs.size()));
  }
  std::uint64_t expected_offset = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& entry = manifest[i];
    if (entry.at("name").get<std::string>() != refs[i].name ||
        entry.at("rows").get<std::size_t>() != refs[i].rows ||
        entry.at("cols").get<std::size_t>() != refs[i].cols ||
        entry.at("offset").get<std::uint64_t>() != expected_offset) {
      throw FormatError("tensor manifest entry " + std::to_string(i) + " (" + refs[i].name +
                        ") does not match the model shape");
    }
    expected_offset += refs[i].values.size() * sizeof(double);
  }
  const auto declared = header.at("payload_bytes").get<std::uint64_t>();
  if (declared != expected_offset) {
    throw FormatError("declared payload length " + std::to_string(declared) +
                      " does not match the manifest total " + std::to_string(expected_offset));
  }
  const std::size_t payload_start = kPrefix + header_len;
  const std::size_t actual = bytes.size() - payload_start;
  if (actual != declared) {
    throw FormatError("payload length mismatch: expected " + std::to_string(declared) +
                      " bytes, got " + std::to_string(actual));
  }
  std::size_t at = payload_start;
  for (auto& t : refs) {
    for (auto& v : t.values) {
      v = get_f64(bytes, at);
      at += sizeof(double);
    }
  }
  return container;
}

void save_model(const std::filesystem::path& path, const ModelContainer& container) {
  const std::string bytes = encode_model(container);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write model file " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing model file " + path.string());
}

ModelContainer load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_model(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::filesystem::path model_file(const std::filesystem::path& dir,
                                 const qcnn::LabelTaxonomy& taxonomy,
                                 std::optional<std::size_t> coarse) {
  if (!coarse) return dir / "tier1.qcnn";
  std::string name = taxonomy.coarse_name(*coarse);
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return dir / ("tier2-" + name + ".qcnn");
}

}  // namespace qclass
