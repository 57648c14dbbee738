#include "sdt/adapter.hpp"

#include <bit>
#include <cstring>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace sdt {
namespace {

constexpr std::string_view kRequestMagic = "SDTQ";
constexpr std::string_view kResponseMagic = "SDTR";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_floats(std::string& out, std::span<const float> vals) {
  out.reserve(out.size() + vals.size() * 4);
  for (float f : vals) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw BackendError("wire: truncated message");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    const auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  void floats(std::span<float> out) {
    for (auto& f : out) f = std::bit_cast<float>(u32());
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

nlohmann::json context_to_json(const DenoiseContext& c) {
  return {{"branch", c.branch == Branch::Panorama ? "panorama" : "perspective"},
          {"view_index", c.view_index},
          {"path_id", c.path_id},
          {"foreground", c.foreground},
          {"lora", c.lora},
          {"circular_padding", c.circular_padding}};
}

DenoiseContext context_from_json(const nlohmann::json& j) {
  DenoiseContext c;
  c.branch = j.at("branch").get<std::string>() == "perspective" ? Branch::Perspective : Branch::Panorama;
  c.view_index = j.at("view_index").get<int>();
  c.path_id = j.at("path_id").get<int>();
  c.foreground = j.at("foreground").get<bool>();
  c.lora = j.at("lora").get<bool>();
  c.circular_padding = j.at("circular_padding").get<bool>();
  return c;
}

void check_magic(Reader& r, std::string_view magic) {
  if (r.take(4) != magic) throw BackendError("wire: bad magic");
  if (r.u32() != kWireVersion) throw BackendError("wire: unsupported version");
}

}  // namespace

std::string encode_predict_request(const Latent& latent, int t_index, std::string_view prompt,
                                   const DenoiseContext& context) {
  const nlohmann::json header{{"t_index", t_index},
                              {"prompt", std::string(prompt)},
                              {"context", context_to_json(context)},
                              {"shape", {latent.channels(), latent.height(), latent.width()}},
                              {"dtype", "float32"}};
  const std::string h = header.dump();
  std::string out(kRequestMagic);
  put_u32(out, kWireVersion);
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  put_floats(out, latent.values());
  return out;
}

PredictRequest decode_predict_request(std::string_view bytes) {
  Reader r(bytes);
  check_magic(r, kRequestMagic);
  const auto header_len = r.u32();
  PredictRequest req;
  try {
    const auto header = nlohmann::json::parse(r.take(header_len));
    if (header.value("dtype", "float32") != "float32") throw BackendError("wire: unsupported dtype");
    const auto shape = header.at("shape").get<std::vector<int>>();
    if (shape.size() != 3) throw BackendError("wire: shape must have 3 entries");
    req.latent = Latent(shape[0], shape[1], shape[2]);
    req.t_index = header.at("t_index").get<int>();
    req.prompt = header.at("prompt").get<std::string>();
    req.context = context_from_json(header.at("context"));
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("wire: bad request header: ") + e.what());
  }
  r.floats(req.latent.values());
  if (!r.done()) throw BackendError("wire: trailing bytes in request");
  return req;
}

std::string encode_predict_response(const Latent& residual) {
  std::string out(kResponseMagic);
  put_u32(out, kWireVersion);
  put_u32(out, static_cast<std::uint32_t>(residual.channels()));
  put_u32(out, static_cast<std::uint32_t>(residual.height()));
  put_u32(out, static_cast<std::uint32_t>(residual.width()));
  put_floats(out, residual.values());
  return out;
}

Latent decode_predict_response(std::string_view bytes) {
  Reader r(bytes);
  check_magic(r, kResponseMagic);
  const auto c = r.u32(), h = r.u32(), w = r.u32();
  Latent z(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
  r.floats(z.values());
  if (!r.done()) throw BackendError("wire: trailing bytes in response");
  return z;
}

std::string handle_predict_request(const Denoiser& denoiser, std::string_view request_bytes) {
  const auto req = decode_predict_request(request_bytes);
  return encode_predict_response(denoiser.predict(req.latent, req.t_index, req.prompt, req.context));
}

AdapterDenoiser::AdapterDenoiser(std::string endpoint, int timeout_seconds) : timeout_seconds_(timeout_seconds) {
  constexpr std::string_view scheme = "http://";
  if (endpoint.starts_with(scheme)) endpoint.erase(0, scheme.size());
  while (!endpoint.empty() && endpoint.back() == '/') endpoint.pop_back();
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos) {
    host_ = endpoint;
  } else {
    host_ = endpoint.substr(0, colon);
    try {
      port_ = std::stoi(endpoint.substr(colon + 1));
    } catch (const std::exception&) {
      throw BackendError("adapter: bad endpoint port in '" + endpoint + "'");
    }
  }
  if (host_.empty()) throw BackendError("adapter: empty endpoint host");
}

AdapterDenoiser::~AdapterDenoiser() = default;

Latent AdapterDenoiser::predict(const Latent& latent, int t_index, std::string_view prompt,
                                const DenoiseContext& context) const {
  httplib::Client cli(host_, port_);
  cli.set_read_timeout(timeout_seconds_, 0);
  cli.set_write_timeout(timeout_seconds_, 0);
  const auto body = encode_predict_request(latent, t_index, prompt, context);
  auto res = cli.Post("/predict", body, "application/octet-stream");
  if (!res) throw BackendError("adapter: request to " + host_ + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw BackendError("adapter: server returned HTTP " + std::to_string(res->status));
  Latent out = decode_predict_response(res->body);
  if (!out.same_shape(latent)) throw BackendError("adapter: residual shape differs from latent shape");
  return out;
}

}  // namespace sdt
