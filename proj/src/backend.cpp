#include "muie/backend.hpp"

#include <httplib.h>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace muie {

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::uie: return "uie";
    case BackendKind::image_segmenter: return "image_segmenter";
    case BackendKind::video_tracker: return "video_tracker";
    case BackendKind::audio_segmenter: return "audio_segmenter";
  }
  return "?";
}

BackendKind parse_backend_kind(std::string_view s) {
  for (BackendKind k : {BackendKind::uie, BackendKind::image_segmenter, BackendKind::video_tracker,
                        BackendKind::audio_segmenter}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidArgument("unknown backend kind '" + std::string(s) + "'", "BAD_BACKEND_SPEC");
}

Modality grounding_modality(BackendKind k) {
  switch (k) {
    case BackendKind::image_segmenter: return Modality::image;
    case BackendKind::video_tracker: return Modality::video;
    case BackendKind::audio_segmenter: return Modality::audio;
    case BackendKind::uie: break;
  }
  throw InvalidArgument("uie backends have no grounding modality");
}

void validate(const BackendSpec& spec) {
  if (!(spec.timeout_seconds > 0)) {
    throw InvalidArgument("backend timeout must be > 0", "BAD_BACKEND_SPEC");
  }
  if (spec.max_inflight < 1) throw InvalidArgument("max_inflight must be >= 1", "BAD_BACKEND_SPEC");
  if (spec.retries < 0 || spec.retries > 1) {
    throw InvalidArgument("retries must be 0 or 1", "BAD_BACKEND_SPEC");
  }
  if (spec.transport != Transport::in_process && spec.target.empty()) {
    throw InvalidArgument("backend target is empty", "BAD_BACKEND_SPEC");
  }
}

BackendSpec parse_backend_spec(std::string_view arg) {
  auto bad = [&](const std::string& why) {
    return InvalidArgument("backend spec '" + std::string(arg) + "': " + why, "BAD_BACKEND_SPEC");
  };
  // KIND, then ",key=value" options, then "=TARGET".
  const auto kind_end = arg.find_first_of(",=");
  if (kind_end == std::string_view::npos) throw bad("expected KIND=TARGET");
  BackendSpec spec;
  spec.kind = parse_backend_kind(arg.substr(0, kind_end));
  spec.name = std::string(arg.substr(0, kind_end));
  std::size_t pos = kind_end;
  while (arg[pos] == ',') {
    const auto key_end = arg.find('=', pos + 1);
    if (key_end == std::string_view::npos) throw bad("option without value");
    const auto val_end = arg.find_first_of(",=", key_end + 1);
    if (val_end == std::string_view::npos) throw bad("expected =TARGET after options");
    const std::string key(arg.substr(pos + 1, key_end - pos - 1));
    const std::string val(arg.substr(key_end + 1, val_end - key_end - 1));
    try {
      std::size_t used = 0;
      if (key == "timeout") {
        spec.timeout_seconds = std::stod(val, &used);
      } else if (key == "inflight") {
        spec.max_inflight = std::stoi(val, &used);
      } else if (key == "retries") {
        spec.retries = std::stoi(val, &used);
      } else {
        throw bad("unknown option '" + key + "'");
      }
      if (used != val.size()) throw bad("bad value for '" + key + "'");
    } catch (const std::logic_error&) {
      throw bad("bad value for '" + key + "'");
    }
    pos = val_end;
  }
  std::string_view target = arg.substr(pos + 1);

  std::string_view rest = target;
  if (const auto at = rest.find('@');
      at != std::string_view::npos && rest.substr(0, at).find(':') == std::string_view::npos) {
    spec.name = std::string(rest.substr(0, at));
    rest = rest.substr(at + 1);
  }
  if (rest.rfind("stdio:", 0) == 0) {
    spec.transport = Transport::stdio;
    spec.target = std::string(rest.substr(6));
  } else if (rest.rfind("http://", 0) == 0) {
    spec.transport = Transport::http;
    spec.target = std::string(rest);
  } else {
    throw bad("target must start with stdio: or http://");
  }
  validate(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// in-flight gate

class Backend::Gate {
 public:
  explicit Gate(int n) : free_(n) {}
  void acquire() {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lock(m_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  int free_;
};

Json Backend::call(const Json& request) {
  struct Slot {
    Gate& g;
    explicit Slot(Gate& gate) : g(gate) { g.acquire(); }
    ~Slot() { g.release(); }
  } slot(*gate_);
  try {
    return call_once(request);
  } catch (const BackendError& e) {
    if (e.code() != "TIMEOUT" || spec_.retries == 0) throw;
  }
  return call_once(request);
}

namespace {

Json check_reply(const Json& reply, const std::string& id) {
  if (!reply.is_object()) throw BackendError("PROTOCOL_ERROR", "reply is not a json object");
  if (reply.contains("error")) {
    const Json& err = reply.at("error");
    std::string what = "backend error";
    if (err.is_object()) {
      what = err.value("code", std::string("BACKEND_ERROR")) + ": " +
             err.value("message", std::string());
    } else if (err.is_string()) {
      what = err.get<std::string>();
    }
    throw BackendError("BACKEND_ERROR", "request " + id + ": " + what);
  }
  return reply;
}

std::string request_id(const Json& request) {
  if (!request.is_object() || !request.contains("id") || !request.at("id").is_string()) {
    throw InvalidArgument("backend request needs a string id");
  }
  return request.at("id").get<std::string>();
}

// ---------------------------------------------------------------------------
// stdio transport

bool executable_exists(const std::string& command) {
  std::istringstream in(command);
  std::string program;
  in >> program;
  if (program.empty()) return false;
  if (program.find('/') != std::string::npos) return ::access(program.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  std::istringstream dirs(path ? path : "/usr/bin:/bin");
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    if (dir.empty()) dir = ".";
    if (::access((dir + "/" + program).c_str(), X_OK) == 0) return true;
  }
  return false;
}

class StdioBackend final : public Backend {
 public:
  explicit StdioBackend(BackendSpec spec) : Backend(std::move(spec)) {
    ::signal(SIGPIPE, SIG_IGN);
    if (!executable_exists(this->spec().target)) {
      throw BackendError("LAUNCH_FAILED",
                         "backend '" + this->spec().name + "': cannot execute '" +
                             this->spec().target + "'");
    }
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0) {
      throw BackendError("LAUNCH_FAILED", std::string("pipe: ") + std::strerror(errno));
    }
    const std::string shell_cmd = "exec " + this->spec().target;
    pid_ = ::fork();
    if (pid_ < 0) throw BackendError("LAUNCH_FAILED", std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", shell_cmd.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    reader_ = std::thread([this] { read_loop(); });
  }

  ~StdioBackend() override {
    {
      std::lock_guard lock(write_mutex_);
      if (write_fd_ >= 0) ::close(write_fd_);
      write_fd_ = -1;
    }
    int status = 0;
    bool exited = false;
    for (int i = 0; i < 200 && !exited; ++i) {
      exited = ::waitpid(pid_, &status, WNOHANG) == pid_;
      if (!exited) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!exited) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    if (reader_.joinable()) reader_.join();
    ::close(read_fd_);
  }

 protected:
  Json call_once(const Json& request) override {
    const std::string id = request_id(request);
    auto promise = std::make_shared<std::promise<Json>>();
    auto future = promise->get_future();
    {
      std::lock_guard lock(pending_mutex_);
      if (closed_) throw BackendError("BACKEND_ERROR", "backend '" + spec().name + "' has exited");
      if (!pending_.emplace(id, promise).second) {
        throw InvalidArgument("duplicate in-flight request id '" + id + "'");
      }
    }
    const std::string line = request.dump(-1, ' ', false, Json::error_handler_t::replace) + "\n";
    if (!write_all(line)) {
      forget(id);
      throw BackendError("BACKEND_ERROR", "backend '" + spec().name + "': write failed");
    }
    const auto timeout = std::chrono::duration<double>(spec().timeout_seconds);
    if (future.wait_for(timeout) != std::future_status::ready) {
      forget(id);
      throw BackendError("TIMEOUT", "request " + id + " timed out after " +
                                        std::to_string(spec().timeout_seconds) + "s");
    }
    return check_reply(future.get(), id);
  }

 private:
  bool write_all(const std::string& s) {
    std::lock_guard lock(write_mutex_);
    std::size_t done = 0;
    while (done < s.size()) {
      if (write_fd_ < 0) return false;
      const ssize_t n = ::write(write_fd_, s.data() + done, s.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      done += static_cast<std::size_t>(n);
    }
    return true;
  }

  void forget(const std::string& id) {
    std::lock_guard lock(pending_mutex_);
    pending_.erase(id);
  }

  void deliver(const std::string& line) {
    Json reply;
    try {
      reply = Json::parse(line);
    } catch (const Json::exception&) {
      std::cerr << "muie: backend '" << spec().name << "': ignoring non-json line\n";
      return;
    }
    if (!reply.is_object() || !reply.contains("id") || !reply.at("id").is_string()) {
      std::cerr << "muie: backend '" << spec().name << "': ignoring reply without id\n";
      return;
    }
    std::shared_ptr<std::promise<Json>> p;
    {
      std::lock_guard lock(pending_mutex_);
      auto it = pending_.find(reply.at("id").get<std::string>());
      if (it == pending_.end()) return;  // late reply to a timed-out request
      p = it->second;
      pending_.erase(it);
    }
    p->set_value(std::move(reply));
  }

  void read_loop() {
    std::string buffer;
    char chunk[65536];
    for (;;) {
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      buffer.append(chunk, static_cast<std::size_t>(n));
      std::size_t start = 0;
      for (std::size_t nl; (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
        std::string line = buffer.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) deliver(line);
      }
      buffer.erase(0, start);
    }
    std::map<std::string, std::shared_ptr<std::promise<Json>>> orphans;
    {
      std::lock_guard lock(pending_mutex_);
      closed_ = true;
      orphans.swap(pending_);
    }
    for (auto& [id, p] : orphans) {
      p->set_exception(std::make_exception_ptr(
          BackendError("BACKEND_ERROR", "backend '" + spec().name + "' exited before replying to " + id)));
    }
  }

  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::mutex write_mutex_;
  std::mutex pending_mutex_;
  std::map<std::string, std::shared_ptr<std::promise<Json>>> pending_;
  bool closed_ = false;
  std::thread reader_;
};

// ---------------------------------------------------------------------------
// http transport

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendSpec spec) : Backend(std::move(spec)) {
    const std::string& url = this->spec().target;
    const auto slash = url.find('/', std::string("http://").size());
    base_ = slash == std::string::npos ? url : url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
  }

 protected:
  Json call_once(const Json& request) override {
    const std::string id = request_id(request);
    httplib::Client client(base_);
    const auto secs = spec().timeout_seconds;
    const auto whole = static_cast<time_t>(secs);
    const auto usec = static_cast<time_t>((secs - static_cast<double>(whole)) * 1e6);
    client.set_connection_timeout(whole, usec);
    client.set_read_timeout(whole, usec);
    client.set_write_timeout(whole, usec);
    auto res = client.Post(path_, request.dump(-1, ' ', false, Json::error_handler_t::replace),
                           "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
        throw BackendError("TIMEOUT", "request " + id + ": " + httplib::to_string(err));
      }
      throw BackendError("BACKEND_ERROR", "request " + id + ": " + httplib::to_string(err));
    }
    if (res->status != 200) {
      throw BackendError("BACKEND_ERROR",
                         "request " + id + ": http status " + std::to_string(res->status));
    }
    Json reply;
    try {
      reply = Json::parse(res->body);
    } catch (const Json::exception&) {
      throw BackendError("PROTOCOL_ERROR", "request " + id + ": reply is not json");
    }
    return check_reply(reply, id);
  }

 private:
  std::string base_;
  std::string path_;
};

class FunctionBackend final : public Backend {
 public:
  FunctionBackend(BackendSpec spec, std::function<Json(const Json&)> fn)
      : Backend(std::move(spec)), fn_(std::move(fn)) {}

 protected:
  Json call_once(const Json& request) override {
    const std::string id = request_id(request);
    return check_reply(fn_(request), id);
  }

 private:
  std::function<Json(const Json&)> fn_;
};

}  // namespace

std::unique_ptr<Backend> connect(const BackendSpec& spec) {
  validate(spec);
  std::unique_ptr<Backend> b;
  switch (spec.transport) {
    case Transport::stdio: b = std::make_unique<StdioBackend>(spec); break;
    case Transport::http: b = std::make_unique<HttpBackend>(spec); break;
    case Transport::in_process:
      throw InvalidArgument("in-process backends are created with make_function_backend");
  }
  b->gate_ = std::make_shared<Backend::Gate>(spec.max_inflight);
  return b;
}

std::unique_ptr<Backend> make_function_backend(BackendSpec spec,
                                               std::function<Json(const Json&)> handler) {
  spec.transport = Transport::in_process;
  validate(spec);
  auto b = std::make_unique<FunctionBackend>(std::move(spec), std::move(handler));
  b->gate_ = std::make_shared<Backend::Gate>(b->spec().max_inflight);
  return b;
}

// ---------------------------------------------------------------------------
// messages

Json make_uie_request(const std::string& id, const std::string& prompt,
                      const std::vector<Attachment>& attachments) {
  Json att = Json::array();
  for (const auto& a : attachments) {
    att.push_back({{"modality", to_string(a.modality)}, {"path", a.path}});
  }
  return {{"id", id}, {"prompt", prompt}, {"attachments", std::move(att)}};
}

Json make_grounding_request(const std::string& id, const std::string& module,
                            const std::string& instruction, const Attachment& source) {
  return {{"id", id},
          {"module", module},
          {"instruction", instruction},
          {"source", {{"modality", to_string(source.modality)}, {"path", source.path}}}};
}

std::string uie_reply_text(const Json& reply) {
  if (!reply.contains("text") || !reply.at("text").is_string()) {
    throw BackendError("PROTOCOL_ERROR", "uie reply without string 'text'");
  }
  return reply.at("text").get<std::string>();
}

std::vector<GroundingRef> grounding_reply_payloads(const Json& reply, Modality expected) {
  static const std::map<Modality, const char*> field{
      {Modality::image, "masks"}, {Modality::audio, "segments"}, {Modality::video, "tracklets"}};
  const auto it = field.find(expected);
  if (it == field.end()) throw InvalidArgument("no grounding payload for text");
  for (const auto& [m, name] : field) {
    if (m != expected && reply.contains(name)) {
      throw BackendError("PROTOCOL_ERROR", std::string("reply carries '") + name +
                                               "' but a " + std::string(to_string(expected)) +
                                               " payload was requested");
    }
  }
  if (!reply.contains(it->second) || !reply.at(it->second).is_array()) {
    throw BackendError("PROTOCOL_ERROR", std::string("reply without '") + it->second + "' array");
  }
  std::vector<GroundingRef> out;
  try {
    for (const auto& p : reply.at(it->second)) {
      switch (expected) {
        case Modality::image: out.emplace_back(mask_from_json(p)); break;
        case Modality::audio: out.emplace_back(segment_from_json(p)); break;
        case Modality::video: out.emplace_back(tracklet_from_json(p)); break;
        case Modality::text: break;
      }
    }
  } catch (const Error& e) {
    throw BackendError("PROTOCOL_ERROR", std::string("bad payload: ") + e.what());
  } catch (const Json::exception& e) {
    throw BackendError("PROTOCOL_ERROR", std::string("bad payload: ") + e.what());
  }
  return out;
}

Json make_grounding_reply(const std::string& id, Modality modality,
                          const std::vector<GroundingRef>& payloads) {
  Json list = Json::array();
  const char* name = modality == Modality::image   ? "masks"
                     : modality == Modality::audio ? "segments"
                                                   : "tracklets";
  for (const auto& g : payloads) {
    if (g.modality() != modality) throw InvalidArgument("mixed payload modalities");
    if (const auto* m = g.mask()) list.push_back(to_json(*m));
    if (const auto* s = g.segment()) list.push_back(to_json(*s));
    if (const auto* t = g.tracklet()) list.push_back(to_json(*t));
  }
  return {{"id", id}, {name, std::move(list)}};
}

}  // namespace muie
