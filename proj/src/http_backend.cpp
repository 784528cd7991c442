#include "perturbex/http_backend.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "perturbex/image_io.hpp"
#include "perturbex/util.hpp"

namespace perturbex {

using nlohmann::json;

namespace {

class Semaphore {
public:
    explicit Semaphore(int count) : count_(count > 0 ? count : 1) {}
    void acquire() {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return count_ > 0; });
        --count_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lk(m_);
            ++count_;
        }
        cv_.notify_one();
    }

private:
    std::mutex m_;
    std::condition_variable cv_;
    int count_;
};

struct SemaphoreGuard {
    explicit SemaphoreGuard(Semaphore& s) : sem(s) { sem.acquire(); }
    ~SemaphoreGuard() { sem.release(); }
    Semaphore& sem;
};

std::string excerpt(const std::string& body) {
    std::string out = body.substr(0, 200);
    for (char& c : out) {
        if (static_cast<unsigned char>(c) < 0x20 && c != '\n') c = '.';
    }
    if (body.size() > 200) out += "...";
    return out;
}

double effective_timeout_s(double descriptor_timeout) {
    if (const char* env = std::getenv("PERTURBEX_TIMEOUT_S")) {
        char* end = nullptr;
        double v = std::strtod(env, &end);
        if (end != env && v > 0.0) return v;
    }
    return descriptor_timeout;
}

// Shared transport: URL parsing, auth, retries, admission control.
struct HttpCore {
    BackendDescriptor desc;
    std::string base;    // scheme://host:port
    std::string prefix;  // path prefix, "" or "/x/y"
    Semaphore sem;

    explicit HttpCore(const BackendDescriptor& d) : desc(d), sem(d.max_concurrency) {
        const std::string& url = d.endpoint;
        auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) {
            throw ConfigError("not an http(s) endpoint: " + url);
        }
        auto path_start = url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            base = url;
        } else {
            base = url.substr(0, path_start);
            prefix = url.substr(path_start);
            while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
        }
    }

    std::unique_ptr<httplib::Client> make_client() const {
        auto cli = std::make_unique<httplib::Client>(base);
        const double timeout = effective_timeout_s(desc.timeout_s);
        const auto dur = std::chrono::milliseconds(
            static_cast<long long>(timeout * 1000.0));
        cli->set_connection_timeout(dur);
        cli->set_read_timeout(dur);
        cli->set_write_timeout(dur);
        if (const char* token = std::getenv("PERTURBEX_API_TOKEN")) {
            if (*token) cli->set_bearer_token_auth(token);
        }
        return cli;
    }

    json post(const std::string& route, const json& payload) {
        SemaphoreGuard guard(sem);
        const std::string path = prefix + route;
        const std::string body = payload.dump();
        const std::string request_id = sha256_hex(body);

        std::string last_cause;
        const int attempts = 1 + std::max(0, desc.retry.max_retries);
        double backoff = desc.retry.backoff_s;
        for (int attempt = 1; attempt <= attempts; ++attempt) {
            if (attempt > 1) {
                std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
                backoff *= 2.0;
            }
            auto cli = make_client();
            httplib::Headers headers = {{"X-Request-Id", request_id}};
            auto res = cli->Post(path, headers, body, "application/json");
            if (!res) {
                last_cause = httplib::to_string(res.error());
                continue;  // transport error: retriable
            }
            if (res->status >= 500) {
                last_cause = "HTTP " + std::to_string(res->status) + ": " +
                             excerpt(res->body);
                continue;  // server error: retriable
            }
            if (res->status != 200) {
                throw BackendError("POST " + base + path + " returned HTTP " +
                                   std::to_string(res->status) + ": " +
                                   excerpt(res->body));
            }
            try {
                return json::parse(res->body);
            } catch (const json::exception& e) {
                throw BackendError("POST " + base + path + " returned malformed JSON (" +
                                   std::string(e.what()) + "): " + excerpt(res->body));
            }
        }
        throw BackendError("POST " + base + path + " failed after " +
                           std::to_string(attempts) + " attempt(s): " + last_cause);
    }
};

json image_payload(const RasterImage& image) {
    return json{{"image", base64_encode(encode_png(image))}};
}

const json& require(const json& obj, const char* key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw BackendError(ctx + ": response missing \"" + key + "\": " +
                           excerpt(obj.dump()));
    }
    return *it;
}

}  // namespace

// --- HttpDetector ------------------------------------------------------------

struct HttpDetector::Impl {
    HttpCore core;
    explicit Impl(const BackendDescriptor& d) : core(d) {}
};

HttpDetector::HttpDetector(const BackendDescriptor& desc)
    : impl_(std::make_unique<Impl>(desc)) {}
HttpDetector::~HttpDetector() = default;

std::string HttpDetector::model_id() const { return "http:" + impl_->core.desc.endpoint; }

std::vector<Detection> HttpDetector::detect(const RasterImage& image) {
    json reply = impl_->core.post("/detect", image_payload(image));
    const json& arr = require(reply, "detections", "detect");
    if (!arr.is_array()) {
        throw BackendError("detect: \"detections\" is not an array: " +
                           excerpt(reply.dump()));
    }
    std::vector<Detection> dets;
    dets.reserve(arr.size());
    for (const auto& item : arr) {
        const json& box = require(item, "bbox", "detect");
        const json& conf = require(item, "confidence", "detect");
        const json& cls = require(item, "class", "detect");
        if (!box.is_array() || box.size() != 4 || !conf.is_number() || !cls.is_string()) {
            throw BackendError("detect: malformed detection entry: " + excerpt(item.dump()));
        }
        Detection d;
        d.class_label = cls.get<std::string>();
        d.bbox = BBox{box[0].get<int>(), box[1].get<int>(), box[2].get<int>(),
                      box[3].get<int>()};
        d.confidence = conf.get<double>();
        if (d.confidence < 0.0 || d.confidence > 1.0) {
            throw BackendError("detect: confidence out of [0,1]: " + excerpt(item.dump()));
        }
        dets.push_back(std::move(d));
    }
    clamp_detections(dets, image.width, image.height);
    sort_detections(dets);
    return dets;
}

// --- HttpSegmenter -----------------------------------------------------------

struct HttpSegmenter::Impl {
    HttpCore core;
    explicit Impl(const BackendDescriptor& d) : core(d) {}
};

HttpSegmenter::HttpSegmenter(const BackendDescriptor& desc)
    : impl_(std::make_unique<Impl>(desc)) {}
HttpSegmenter::~HttpSegmenter() = default;

std::string HttpSegmenter::model_id() const { return "http:" + impl_->core.desc.endpoint; }

std::vector<BinaryMask> HttpSegmenter::segment(const RasterImage& image,
                                               const std::vector<BBox>& boxes) {
    json payload = image_payload(image);
    json jboxes = json::array();
    for (const auto& b : boxes) jboxes.push_back({b.x, b.y, b.w, b.h});
    payload["boxes"] = std::move(jboxes);

    json reply = impl_->core.post("/segment", payload);
    const json& arr = require(reply, "masks", "segment");
    if (!arr.is_array() || arr.size() != boxes.size()) {
        throw BackendError("segment: expected " + std::to_string(boxes.size()) +
                           " masks, got " + excerpt(reply.dump()));
    }
    std::vector<BinaryMask> masks;
    masks.reserve(arr.size());
    for (const auto& item : arr) {
        if (!item.is_string()) {
            throw BackendError("segment: mask entry is not a string");
        }
        BinaryMask mask;
        try {
            mask = decode_mask_png(base64_decode(item.get<std::string>()));
        } catch (const Error& e) {
            throw BackendError("segment: undecodable mask: " + std::string(e.what()));
        }
        if (mask.width != image.width || mask.height != image.height) {
            throw BackendError("segment: mask dimensions " + std::to_string(mask.width) +
                               "x" + std::to_string(mask.height) + " do not match image");
        }
        masks.push_back(std::move(mask));
    }
    return masks;
}

// --- HttpInpainter -----------------------------------------------------------

struct HttpInpainter::Impl {
    HttpCore core;
    explicit Impl(const BackendDescriptor& d) : core(d) {}
};

HttpInpainter::HttpInpainter(const BackendDescriptor& desc)
    : impl_(std::make_unique<Impl>(desc)) {}
HttpInpainter::~HttpInpainter() = default;

std::string HttpInpainter::model_id() const { return "http:" + impl_->core.desc.endpoint; }

RasterImage HttpInpainter::inpaint(const RasterImage& image, const BinaryMask& mask,
                                   const std::string& positive, const std::string& negative,
                                   const InpaintParams& params) {
    json payload = image_payload(image);
    payload["mask"] = base64_encode(encode_mask_png(mask));
    payload["prompt"] = positive;
    payload["negative_prompt"] = negative;
    payload["params"] = {{"guidance_scale", params.guidance_scale},
                         {"num_inference_steps", params.num_inference_steps},
                         {"strength", params.strength},
                         {"scheduler", params.scheduler},
                         {"seed", params.seed}};

    json reply = impl_->core.post("/inpaint", payload);
    const json& img = require(reply, "image", "inpaint");
    if (!img.is_string()) {
        throw BackendError("inpaint: \"image\" is not a string");
    }
    RasterImage out;
    try {
        out = decode_png(base64_decode(img.get<std::string>()));
    } catch (const Error& e) {
        throw BackendError("inpaint: undecodable image: " + std::string(e.what()));
    }
    if (out.width != image.width || out.height != image.height) {
        throw BackendError("inpaint: result dimensions " + std::to_string(out.width) + "x" +
                           std::to_string(out.height) + " do not match request");
    }
    return out;
}

// --- healthcheck ---------------------------------------------------------------

HealthStatus http_healthcheck(const BackendDescriptor& desc) {
    HealthStatus st;
    try {
        HttpCore core(desc);
        auto cli = core.make_client();
        auto res = cli->Get(core.prefix + "/healthz");
        if (!res) {
            st.cause = httplib::to_string(res.error());
            return st;
        }
        if (res->status != 200) {
            st.cause = "HTTP " + std::to_string(res->status) + ": " + excerpt(res->body);
            return st;
        }
        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || reply.value("status", "") != "ok") {
            st.cause = "unexpected health payload: " + excerpt(res->body);
            return st;
        }
        st.reachable = true;
        auto models = reply.find("models");
        if (models != reply.end() && models->is_object()) {
            auto it = models->find(to_string(desc.kind));
            if (it != models->end() && it->is_string()) st.model = it->get<std::string>();
        }
    } catch (const Error& e) {
        st.cause = e.what();
    }
    return st;
}

// --- MockServer ----------------------------------------------------------------

struct MockServer::Impl {
    httplib::Server svr;
    std::thread thread;
    std::unique_ptr<Detector> detector;
    std::unique_ptr<Segmenter> segmenter;
    std::unique_ptr<Inpainter> inpainter;
    std::string required_token;
    std::atomic<int> fail_budget{0};
    std::atomic<int> requests{0};
    std::mutex backend_mutex;  // mock backends are cheap; serialize them

    bool admit(const httplib::Request& req, httplib::Response& res) {
        ++requests;
        if (fail_budget.load() > 0 && fail_budget.fetch_sub(1) > 0) {
            res.status = 500;
            res.set_content("{\"error\":\"injected transient failure\"}",
                            "application/json");
            return false;
        }
        if (!required_token.empty()) {
            auto auth = req.get_header_value("Authorization");
            if (auth != "Bearer " + required_token) {
                res.status = 401;
                res.set_content("{\"error\":\"missing or invalid bearer token\"}",
                                "application/json");
                return false;
            }
        }
        return true;
    }

    static void bad_request(httplib::Response& res, const std::string& what) {
        res.status = 400;
        res.set_content(json{{"error", what}}.dump(), "application/json");
    }
};

MockServer::MockServer(const std::string& detector_endpoint,
                       const std::string& segmenter_endpoint,
                       const std::string& inpainter_endpoint)
    : impl_(std::make_unique<Impl>()) {
    BackendDescriptor d;
    d.kind = BackendKind::detector;
    d.endpoint = detector_endpoint;
    impl_->detector = make_detector(d);
    BackendDescriptor s;
    s.kind = BackendKind::segmenter;
    s.endpoint = segmenter_endpoint;
    impl_->segmenter = make_segmenter(s);
    BackendDescriptor i;
    i.kind = BackendKind::inpainter;
    i.endpoint = inpainter_endpoint;
    impl_->inpainter = make_inpainter(i);

    Impl* im = impl_.get();

    impl_->svr.Post("/detect", [im](const httplib::Request& req, httplib::Response& res) {
        if (!im->admit(req, res)) return;
        try {
            json body = json::parse(req.body);
            RasterImage image =
                decode_png(base64_decode(body.at("image").get<std::string>()));
            std::vector<Detection> dets;
            {
                std::lock_guard<std::mutex> lk(im->backend_mutex);
                dets = im->detector->detect(image);
            }
            json arr = json::array();
            for (const auto& d : dets) {
                arr.push_back({{"class", d.class_label},
                               {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
                               {"confidence", d.confidence}});
            }
            res.set_content(json{{"detections", arr}}.dump(), "application/json");
        } catch (const std::exception& e) {
            Impl::bad_request(res, e.what());
        }
    });

    impl_->svr.Post("/segment", [im](const httplib::Request& req, httplib::Response& res) {
        if (!im->admit(req, res)) return;
        try {
            json body = json::parse(req.body);
            RasterImage image =
                decode_png(base64_decode(body.at("image").get<std::string>()));
            std::vector<BBox> boxes;
            for (const auto& b : body.at("boxes")) {
                boxes.push_back(BBox{b.at(0).get<int>(), b.at(1).get<int>(),
                                     b.at(2).get<int>(), b.at(3).get<int>()});
            }
            std::vector<BinaryMask> masks;
            {
                std::lock_guard<std::mutex> lk(im->backend_mutex);
                masks = im->segmenter->segment(image, boxes);
            }
            json arr = json::array();
            for (const auto& m : masks) arr.push_back(base64_encode(encode_mask_png(m)));
            res.set_content(json{{"masks", arr}}.dump(), "application/json");
        } catch (const std::exception& e) {
            Impl::bad_request(res, e.what());
        }
    });

    impl_->svr.Post("/inpaint", [im](const httplib::Request& req, httplib::Response& res) {
        if (!im->admit(req, res)) return;
        try {
            json body = json::parse(req.body);
            RasterImage image =
                decode_png(base64_decode(body.at("image").get<std::string>()));
            BinaryMask mask =
                decode_mask_png(base64_decode(body.at("mask").get<std::string>()));
            InpaintParams params;
            if (auto it = body.find("params"); it != body.end()) {
                params.guidance_scale = it->value("guidance_scale", params.guidance_scale);
                params.num_inference_steps =
                    it->value("num_inference_steps", params.num_inference_steps);
                params.strength = it->value("strength", params.strength);
                params.scheduler = it->value("scheduler", params.scheduler);
                params.seed = it->value("seed", params.seed);
            }
            RasterImage out;
            {
                std::lock_guard<std::mutex> lk(im->backend_mutex);
                out = im->inpainter->inpaint(image, mask, body.value("prompt", ""),
                                             body.value("negative_prompt", ""), params);
            }
            res.set_content(json{{"image", base64_encode(encode_png(out))}}.dump(),
                            "application/json");
        } catch (const std::exception& e) {
            Impl::bad_request(res, e.what());
        }
    });

    impl_->svr.Get("/healthz", [im](const httplib::Request&, httplib::Response& res) {
        json models = {{"detector", im->detector->model_id()},
                       {"segmenter", im->segmenter->model_id()},
                       {"inpainter", im->inpainter->model_id()}};
        res.set_content(json{{"status", "ok"}, {"models", models}}.dump(),
                        "application/json");
    });
}

MockServer::~MockServer() { stop(); }

int MockServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->svr.bind_to_any_port(host);
        if (bound < 0) throw BackendError("mock server: could not bind to any port");
    } else if (!impl_->svr.bind_to_port(host, port)) {
        throw BackendError("mock server: could not bind to port " + std::to_string(port));
    }
    impl_->thread = std::thread([this] { impl_->svr.listen_after_bind(); });
    impl_->svr.wait_until_ready();
    return bound;
}

void MockServer::run(const std::string& host, int port) {
    if (!impl_->svr.listen(host, port)) {
        throw BackendError("mock server: could not listen on " + host + ":" +
                           std::to_string(port));
    }
}

void MockServer::stop() {
    impl_->svr.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void MockServer::set_required_token(const std::string& token) {
    impl_->required_token = token;
}

void MockServer::fail_next(int n) { impl_->fail_budget.store(n); }

int MockServer::request_count() const { return impl_->requests.load(); }

}  // namespace perturbex
