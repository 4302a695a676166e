#include <doctest.h>

#include <cstdio>

#include "bitseq/bpe.hpp"
#include "bitseq/errors.hpp"
#include "bitseq/trajtext.hpp"
#include "test_helpers.hpp"

using namespace bitseq;

TEST_CASE("first merge of 'ababab' is (a, b)") {
  BpeVocab v = train_bpe({"ababab"}, 8);
  REQUIRE(!v.merges.empty());
  const auto [l, r] = v.merges[0];
  CHECK(v.tokens[static_cast<size_t>(l)] == "a");
  CHECK(v.tokens[static_cast<size_t>(r)] == "b");
}

TEST_CASE("vocab_size at the base alphabet yields zero merges") {
  // alphabet {a, b} + 3 specials = 5 ids
  BpeVocab v = train_bpe({"abab"}, 5);
  CHECK(v.merges.empty());
  CHECK(v.size() == 5);
}

TEST_CASE("empty corpus and undersized vocab are rejected") {
  CHECK_THROWS_AS(train_bpe({}, 100), std::invalid_argument);
  CHECK_THROWS_AS(train_bpe({"abc"}, 3), std::invalid_argument);
}

TEST_CASE("replaying merges reproduces training-time segmentation") {
  const std::vector<std::string> corpus = {"12.50,3.25 12.75,3.50", "12.50,3.75 13.00,4.00",
                                           "0.25,-1.50 0.50,-1.25"};
  BpeVocab v = train_bpe(corpus, 40);

  // Independent replay on token strings.
  for (const auto& text : corpus) {
    std::vector<std::string> seg;
    for (char c : text) seg.emplace_back(1, c);
    for (const auto& [li, ri] : v.merges) {
      const std::string& a = v.tokens[static_cast<size_t>(li)];
      const std::string& b = v.tokens[static_cast<size_t>(ri)];
      std::vector<std::string> next;
      for (size_t i = 0; i < seg.size();) {
        if (i + 1 < seg.size() && seg[i] == a && seg[i + 1] == b) {
          next.push_back(a + b);
          i += 2;
        } else {
          next.push_back(seg[i]);
          i += 1;
        }
      }
      seg = std::move(next);
    }
    const auto ids = bpe_encode(v, text);
    REQUIRE(ids.size() == seg.size());
    for (size_t i = 0; i < ids.size(); ++i)
      CHECK(v.tokens[static_cast<size_t>(ids[i])] == seg[i]);
  }
}

TEST_CASE("decode(encode(t)) is the identity on in-alphabet text") {
  Rng rng(55);
  std::vector<std::string> corpus;
  for (int i = 0; i < 40; ++i) {
    TrajectoryWindow w;
    for (int t = 0; t < 8; ++t)
      w.obs.push_back({rng.uniform(0.0f, 30.0f), rng.uniform(0.0f, 30.0f)});
    corpus.push_back(serialize_window(w));
  }
  BpeVocab v = train_bpe(corpus, 96);

  for (int i = 0; i < 200; ++i) {
    TrajectoryWindow w;
    for (int t = 0; t < 8; ++t)
      w.obs.push_back({rng.uniform(0.0f, 30.0f), rng.uniform(0.0f, 30.0f)});
    const std::string text = serialize_window(w);
    const auto ids = bpe_encode(v, text);
    CHECK(bpe_decode(v, ids) == text);
    CHECK(ids.size() <= text.size());       // merging only shrinks
    CHECK(bpe_encode(v, text) == ids);      // deterministic
  }
}

TEST_CASE("unknown characters map to unk") {
  BpeVocab v = train_bpe({"aabb"}, 8);
  const auto ids = bpe_encode(v, "aZb");
  REQUIRE(ids.size() == 3);
  CHECK(ids[1] == BpeVocab::kUnkId);
  CHECK(bpe_decode(v, ids) == "a<unk>b");
}

TEST_CASE("vocab file round trip preserves tokenization") {
  const std::vector<std::string> corpus = {"10.25,3.50 10.50,3.75", "7.00,2.25 7.25,2.50"};
  BpeVocab v = train_bpe(corpus, 48);
  save_vocab(v, "test_vocab.txt");
  BpeVocab w = load_vocab("test_vocab.txt");
  CHECK(w.tokens == v.tokens);
  CHECK(w.merges == v.merges);
  CHECK(w.alphabet == v.alphabet);
  for (const auto& text : corpus) CHECK(bpe_encode(w, text) == bpe_encode(v, text));
  std::remove("test_vocab.txt");

  CHECK_THROWS_AS(load_vocab("missing_vocab.txt"), IoError);
}

// ---------------------------------------------------------------------------
// Trajectory text
// ---------------------------------------------------------------------------

TEST_CASE("serialize/parse round trip at precision 2") {
  std::vector<Point> pts{{1.25f, -3.50f}};
  const std::string text = serialize_answer(pts, 2);
  CHECK(text == "1.25,-3.50");
  auto parsed = parse_answer(text);
  REQUIRE(std::holds_alternative<std::vector<Point>>(parsed));
  const auto& got = std::get<std::vector<Point>>(parsed);
  REQUIRE(got.size() == 1);
  CHECK(got[0].x == 1.25f);
  CHECK(got[0].y == -3.50f);
}

TEST_CASE("empty answer round trips to an empty parse") {
  CHECK(serialize_answer({}, 2).empty());
  auto parsed = parse_answer("");
  REQUIRE(std::holds_alternative<std::vector<Point>>(parsed));
  CHECK(std::get<std::vector<Point>>(parsed).empty());
}

TEST_CASE("parse failures carry a reason") {
  auto truncated = parse_answer("1.25,3.50 7.25,");
  REQUIRE(std::holds_alternative<DecodeFailure>(truncated));
  CHECK(std::get<DecodeFailure>(truncated).reason == DecodeFailure::Reason::TruncatedPair);

  auto nonnum = parse_answer("1.25,abc");
  REQUIRE(std::holds_alternative<DecodeFailure>(nonnum));
  CHECK(std::get<DecodeFailure>(nonnum).reason == DecodeFailure::Reason::NonNumeric);

  // Runaway generation: endless repeated pairs overflow the budget.
  std::string runaway;
  for (int i = 0; i < 500; ++i) runaway += "1.00,1.00 ";
  auto overflow = parse_answer(runaway, 256);
  REQUIRE(std::holds_alternative<DecodeFailure>(overflow));
  CHECK(std::get<DecodeFailure>(overflow).reason == DecodeFailure::Reason::LengthOverflow);
}

TEST_CASE("parse_answer never throws on arbitrary bytes") {
  Rng rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    std::string junk;
    const int len = rng.uniform_int(64);
    for (int i = 0; i < len; ++i) junk += static_cast<char>(rng.uniform_int(256));
    CHECK_NOTHROW(parse_answer(junk));
  }
  // Corrupted decodes built from valid fragments.
  for (int trial = 0; trial < 200; ++trial) {
    std::string s = "12.25,3.50 ";
    for (int i = 0; i < rng.uniform_int(8); ++i) {
      const char* frags[] = {",,", "1.", "-", "nan,1", "1,2,3", "9.75,", ".5,.5", "x,y"};
      s += frags[rng.uniform_int(8)];
      s += ' ';
    }
    CHECK_NOTHROW(parse_answer(s));
  }
}

TEST_CASE("window serialization includes neighbors in proximity order") {
  TrajectoryWindow w;
  for (int t = 0; t < 2; ++t) w.obs.push_back({static_cast<float>(t), 0.0f});
  w.neighbor_obs.push_back({{5.0f, 5.0f}, {5.5f, 5.0f}});
  SerializeOptions opts;
  opts.fut_len = 12;
  const std::string text = serialize_window(w, opts);
  CHECK(text == "q: predict 12 steps for agent 0 . c: a0: 0.00,0.00 1.00,0.00 a1: 5.00,5.00 5.50,5.00");
}
