#pragma once

#include <memory>
#include <string>
#include <vector>

#include "perturbex/backends.hpp"

namespace perturbex {

// JSON-over-HTTP adapters for remote detector/segmenter/inpainter services.
// Wire schema:
//   POST {endpoint}/detect   {"image": b64-PNG}
//       -> {"detections":[{"class":str,"bbox":[x,y,w,h],"confidence":num}]}
//   POST {endpoint}/segment  {"image": b64-PNG, "boxes":[[x,y,w,h]...]}
//       -> {"masks":[b64-PNG-gray ...]}
//   POST {endpoint}/inpaint  {"image":b64,"mask":b64,"prompt":str,
//                             "negative_prompt":str,"params":{...}}
//       -> {"image": b64-PNG}
//   GET  {endpoint}/healthz  -> {"status":"ok","models":{kind:model ...}}
//
// PERTURBEX_API_TOKEN, when set, is sent as a bearer Authorization header;
// PERTURBEX_TIMEOUT_S overrides the descriptor timeout. Requests carry a
// content-addressed X-Request-Id (SHA-256 of the body) so retries are
// idempotent by construction. Transient failures (connect errors, 5xx) are
// retried per the descriptor policy with doubling backoff; 4xx and malformed
// responses fail immediately with a payload excerpt.

class HttpDetector : public Detector {
public:
    explicit HttpDetector(const BackendDescriptor& desc);
    ~HttpDetector() override;
    std::vector<Detection> detect(const RasterImage& image) override;
    std::string model_id() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

class HttpSegmenter : public Segmenter {
public:
    explicit HttpSegmenter(const BackendDescriptor& desc);
    ~HttpSegmenter() override;
    std::vector<BinaryMask> segment(const RasterImage& image,
                                    const std::vector<BBox>& boxes) override;
    std::string model_id() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

class HttpInpainter : public Inpainter {
public:
    explicit HttpInpainter(const BackendDescriptor& desc);
    ~HttpInpainter() override;
    RasterImage inpaint(const RasterImage& image, const BinaryMask& mask,
                        const std::string& positive, const std::string& negative,
                        const InpaintParams& params) override;
    std::string model_id() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

HealthStatus http_healthcheck(const BackendDescriptor& desc);

/// Serves a set of mock backends over the wire schema, closing the loop on
/// the external interface without any external model. Used by the
/// `mock-serve` subcommand and the adapter integration tests.
class MockServer {
public:
    /// Endpoints are mock names ("mock:blob", "mock:fill", ...).
    MockServer(const std::string& detector_endpoint,
               const std::string& segmenter_endpoint,
               const std::string& inpainter_endpoint);
    ~MockServer();

    /// Bind and serve on a background thread. port 0 picks a free port.
    /// Returns the bound port.
    int start(const std::string& host, int port);
    /// Serve on the calling thread (CLI mode). Blocks until stop().
    void run(const std::string& host, int port);
    void stop();

    /// Non-empty: POSTs must carry "Authorization: Bearer <token>" or get 401.
    void set_required_token(const std::string& token);
    /// The next n POSTs answer 500 (transient-failure injection for retry tests).
    void fail_next(int n);
    /// POST requests served so far.
    int request_count() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace perturbex
