#include <doctest.h>

#include <chrono>
#include <fstream>
#include <thread>

#include "../support/fixture_corpus.hpp"
#include "muie/backend.hpp"

using namespace muie;
namespace fs = std::filesystem;

TEST_SUITE("backend") {
  TEST_CASE("spec parsing") {
    const auto s = parse_backend_spec("uie,timeout=2.5,inflight=4=gpt@stdio:muie-stub oracle --manifest m.jsonl");
    CHECK(s.kind == BackendKind::uie);
    CHECK(s.name == "gpt");
    CHECK(s.transport == Transport::stdio);
    CHECK(s.target == "muie-stub oracle --manifest m.jsonl");
    CHECK(s.timeout_seconds == 2.5);
    CHECK(s.max_inflight == 4);
    const auto h = parse_backend_spec("image_segmenter=http://127.0.0.1:8080/seg");
    CHECK(h.transport == Transport::http);
    CHECK(h.name == "image_segmenter");
    for (const char* bad : {"uie", "robot=stdio:x", "uie=ftp://x", "uie,timeout=0=stdio:x",
                            "uie,inflight=0=stdio:x", "uie,colour=3=stdio:x", "uie=stdio:"}) {
      CHECK_THROWS_AS(parse_backend_spec(bad), InvalidArgument);
    }
  }

  TEST_CASE("stdio round trip with pipelined requests") {
    BackendSpec s = parse_backend_spec("uie,inflight=4=stdio:" MUIE_STUB_PATH " echo --text " MUIE_STUB_PATH);
    auto b = connect(s);
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int i = 0; i < 8; ++i) {
      threads.emplace_back([&, i] {
        const Json reply = b->call(make_uie_request("r" + std::to_string(i), "p", {}));
        if (reply.at("id") == "r" + std::to_string(i) && reply.contains("text")) ++ok;
      });
    }
    for (auto& t : threads) t.join();
    CHECK(ok == 8);
  }

  TEST_CASE("error replies and timeouts") {
    auto b = connect(parse_backend_spec("image_segmenter=stdio:" MUIE_STUB_PATH " echo"));
    try {
      b->call(make_grounding_request("g1", "Image Segmenter", "x", {Modality::image, "p"}));
      FAIL("expected error");
    } catch (const BackendError& e) {
      CHECK(e.code() == "BACKEND_ERROR");
    }
    auto silent = connect(parse_backend_spec("uie,timeout=0.2,retries=1=stdio:sleep 30"));
    const auto t0 = std::chrono::steady_clock::now();
    try {
      silent->call(make_uie_request("u", "p", {}));
      FAIL("expected timeout");
    } catch (const BackendError& e) {
      CHECK(e.code() == "TIMEOUT");
    }
    CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(390));
  }

  TEST_CASE("launch failure is reported up front") {
    try {
      connect(parse_backend_spec("uie=stdio:/nonexistent/backend --flag"));
      FAIL("expected launch failure");
    } catch (const BackendError& e) {
      CHECK(e.code() == "LAUNCH_FAILED");
    }
  }

  TEST_CASE("grounding reply payloads") {
    const Json masks{{"id", "x"}, {"masks", {{{"width", 2}, {"height", 1}, {"rle", {1, 1}}}}}};
    CHECK(grounding_reply_payloads(masks, Modality::image).size() == 1);
    CHECK_THROWS_AS(grounding_reply_payloads(masks, Modality::audio), BackendError);
    const Json segs{{"id", "x"}, {"segments", {{0.5, 1.0}, {2.0, 3.0}}}};
    CHECK(grounding_reply_payloads(segs, Modality::audio).size() == 2);
    const Json bad{{"id", "x"}, {"segments", {{3.0, 1.0}}}};
    CHECK_THROWS_AS(grounding_reply_payloads(bad, Modality::audio), BackendError);
    const auto refs = grounding_reply_payloads(segs, Modality::audio);
    CHECK(make_grounding_reply("x", Modality::audio, refs) == segs);
  }
}
