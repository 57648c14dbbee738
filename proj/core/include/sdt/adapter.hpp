#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "sdt/backend.hpp"

namespace sdt {

// Wire format for an out-of-process denoiser. All integers are little-endian
// uint32; tensors are little-endian float32 in C order (channel, row, column).
//
//   request  = "SDTQ" version header_len header_json tensor
//   response = "SDTR" version channels height width tensor
//
// header_json carries {t_index, prompt, context, shape:[c,h,w], dtype:"float32"}.
// The client POSTs the request to <endpoint>/predict with content type
// application/octet-stream.

inline constexpr std::uint32_t kWireVersion = 1;

struct PredictRequest {
  Latent latent;
  int t_index = 0;
  std::string prompt;
  DenoiseContext context;
};

std::string encode_predict_request(const Latent& latent, int t_index, std::string_view prompt,
                                   const DenoiseContext& context);
PredictRequest decode_predict_request(std::string_view bytes);
std::string encode_predict_response(const Latent& residual);
Latent decode_predict_response(std::string_view bytes);

/// Server-side helper: decodes a request, runs `denoiser`, encodes the reply.
std::string handle_predict_request(const Denoiser& denoiser, std::string_view request_bytes);

/// Denoiser that forwards every call to a diffusion server over HTTP.
/// `endpoint` is "http://host:port" or "host:port".
class AdapterDenoiser final : public Denoiser {
 public:
  explicit AdapterDenoiser(std::string endpoint, int timeout_seconds = 600);
  ~AdapterDenoiser() override;

  Latent predict(const Latent& latent, int t_index, std::string_view prompt,
                 const DenoiseContext& context) const override;

 private:
  std::string host_;
  int port_ = 80;
  int timeout_seconds_;
};

}  // namespace sdt
