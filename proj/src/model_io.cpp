#include <bit>
#include <cstring>
#include <fstream>

#include "acervo/error.hpp"
#include "acervo/train.hpp"

namespace acervo {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
constexpr const char* kFormat = "acervo-head/1";

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    std::uint32_t chunk = static_cast<std::uint32_t>(bytes[i]) << 16;
    if (i + 1 < bytes.size()) chunk |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
    if (i + 2 < bytes.size()) chunk |= bytes[i + 2];
    out += kAlphabet[(chunk >> 18) & 63];
    out += kAlphabet[(chunk >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(chunk >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? kAlphabet[chunk & 63] : '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw Error(ErrorCode::parse, "model parameters: bad base64 length");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t chunk = 0;
    int pad = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      int v = 0;
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
      } else {
        v = value(c);
        if (v < 0 || pad > 0) throw Error(ErrorCode::parse, "model parameters: bad base64 character");
      }
      chunk = (chunk << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<unsigned char>(chunk >> 16));
    if (pad < 2) out.push_back(static_cast<unsigned char>(chunk >> 8));
    if (pad < 1) out.push_back(static_cast<unsigned char>(chunk));
  }
  return out;
}

void put_f32(std::vector<unsigned char>& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<unsigned char>(bits >> s));
}

}  // namespace

Json model_to_json(const HeadModel& model, const std::string& config_hash) {
  model.validate();
  std::vector<unsigned char> bytes;
  bytes.reserve(model.parameter_count() * 4);
  for (auto block : model.parameters())
    for (double v : block) put_f32(bytes, v);
  Json classifiers = Json::array();
  for (const auto& c : model.classifiers) classifiers.push_back({{"name", c.name}, {"labels", c.labels}});
  Json j = {{"format", kFormat},
            {"kind", to_string(model.kind)},
            {"input_dim", model.input_dim()},
            {"hidden_dim", model.hidden_dim()},
            {"output_dim", model.output_dim()},
            {"classifiers", classifiers},
            {"config_hash", config_hash},
            {"parameter_count", model.parameter_count()},
            {"parameters", base64_encode(bytes)}};
  return j;
}

HeadModel model_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormat)
      throw Error(ErrorCode::parse, "unsupported model format '" + j.at("format").get<std::string>() + "'");
    HeadModel model;
    model.kind = head_kind_from_string(j.at("kind").get<std::string>());
    const auto in = j.at("input_dim").get<std::size_t>();
    const auto hidden = j.at("hidden_dim").get<std::size_t>();
    const auto out = j.at("output_dim").get<std::size_t>();
    if (model.kind == HeadKind::two_layer) {
      model.first = DenseLayer(in, hidden);
      model.second = DenseLayer(hidden, out);
    } else {
      model.first = DenseLayer(in, out);
    }
    for (const auto& c : j.at("classifiers")) {
      auto labels = c.at("labels").get<std::vector<std::string>>();
      ClassifierHead head{c.at("name").get<std::string>(), labels, DenseLayer(out, labels.size())};
      model.classifiers.push_back(std::move(head));
    }
    const auto bytes = base64_decode(j.at("parameters").get<std::string>());
    if (bytes.size() != model.parameter_count() * 4)
      throw Error(ErrorCode::parse, "model parameters: expected " + std::to_string(model.parameter_count()) +
                                        " floats, found " + std::to_string(bytes.size() / 4));
    std::size_t pos = 0;
    for (auto block : model.parameters()) {
      for (double& v : block) {
        std::uint32_t bits = 0;
        for (int s = 0; s < 4; ++s) bits |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * s);
        v = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
    model.validate();
    return model;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, std::string("model file: ") + e.what());
  }
}

void save_model(const HeadModel& model, const std::string& config_hash, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write model file " + path.string());
  out << model_to_json(model, config_hash).dump(2) << '\n';
}

HeadModel load_model(const std::filesystem::path& path, std::string* config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open model file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, "model file " + path.string() + ": " + e.what());
  }
  HeadModel model = model_from_json(j);
  if (config_hash) *config_hash = j.value("config_hash", "");
  return model;
}

}  // namespace acervo
