#include <catch2/catch_amalgamated.hpp>

#include <grasp/common.hpp>

#include <random>

using namespace grasp;

TEST_CASE("trim strips surrounding whitespace only") {
    CHECK(trim("  hello  ") == "hello");
    CHECK(trim("\t a b \r\n") == "a b");
    CHECK(trim("") == "");
    CHECK(trim("   ") == "");
    CHECK(trim("x") == "x");
}

TEST_CASE("lower_ascii lowers ASCII and leaves other bytes alone") {
    CHECK(lower_ascii("MiXeD 123") == "mixed 123");
    CHECK(lower_ascii("\xc3\x89") == "\xc3\x89");  // multi-byte untouched
}

TEST_CASE("starts_with_icase") {
    CHECK(starts_with_icase("Action: DONE", "action:"));
    CHECK_FALSE(starts_with_icase("act", "action"));
    CHECK(starts_with_icase("", ""));
}

TEST_CASE("split_lines handles LF, CRLF, and trailing newlines") {
    auto lines = split_lines("a\r\nb\nc");
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "a");
    CHECK(lines[1] == "b");
    CHECK(lines[2] == "c");

    lines = split_lines("x\n");
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "x");
    CHECK(lines[1] == "");

    lines = split_lines("");
    REQUIRE(lines.size() == 1);
    CHECK(lines[0] == "");
}

TEST_CASE("whitespace_token_count matches hand counts") {
    CHECK(whitespace_token_count("") == 0);
    CHECK(whitespace_token_count("   ") == 0);
    CHECK(whitespace_token_count("one") == 1);
    CHECK(whitespace_token_count("one two\tthree\nfour") == 4);
    CHECK(whitespace_token_count("  padded   out  ") == 2);
}

TEST_CASE("lexical_tokens lowercases and splits on non-word bytes") {
    auto toks = lexical_tokens("Saint Alaric's ninth-century HERMIT, no. 7");
    std::vector<std::string> want = {"saint", "alaric", "s",      "ninth",
                                     "century", "hermit", "no", "7"};
    CHECK(toks == want);

    // Bytes >= 0x80 count as word bytes, so UTF-8 words survive.
    auto utf = lexical_tokens("caf\xc3\xa9 bar");
    REQUIRE(utf.size() == 2);
    CHECK(utf[0] == "caf\xc3\xa9");
    CHECK(utf[1] == "bar");

    CHECK(lexical_tokens("...").empty());
}

TEST_CASE("fnv1a64 matches the published test vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("to_hex is fixed-width lowercase") {
    CHECK(to_hex(0) == "0000000000000000");
    CHECK(to_hex(0xdeadbeefULL) == "00000000deadbeef");
}

TEST_CASE("base64 round trip") {
    CHECK(base64_encode(nullptr, 0) == "");
    const unsigned char one[] = {'M'};
    CHECK(base64_encode(one, 1) == "TQ==");
    const unsigned char two[] = {'M', 'a'};
    CHECK(base64_encode(two, 2) == "TWE=");
    const unsigned char three[] = {'M', 'a', 'n'};
    CHECK(base64_encode(three, 3) == "TWFu");

    std::mt19937_64 eng(7);
    for (size_t len : {0u, 1u, 2u, 3u, 17u, 64u, 255u}) {
        std::vector<unsigned char> data(len);
        for (auto& b : data) b = static_cast<unsigned char>(eng() & 0xff);
        std::string enc = base64_encode(data.data(), data.size());
        CHECK(base64_decode(enc) == data);
    }
}

TEST_CASE("base64_decode rejects invalid input") {
    CHECK_THROWS_AS(base64_decode("abc!"), DataError);
    CHECK_THROWS_AS(base64_decode("TQ==TQ=="), DataError);  // data after padding
    CHECK_THROWS_AS(base64_decode("===="), DataError);
    // Whitespace is tolerated.
    const unsigned char three[] = {'M', 'a', 'n'};
    CHECK(base64_decode("TW\nFu") ==
          std::vector<unsigned char>(three, three + 3));
}

TEST_CASE("embedding codec is exact over float32 values") {
    Vec v = {0.5, -1.0, 0.0, 1.0, 0.25, -0.125};
    Vec back = decode_embedding(encode_embedding(v));
    REQUIRE(back.size() == v.size());
    for (size_t i = 0; i < v.size(); ++i) CHECK(back[i] == v[i]);

    // Arbitrary doubles survive exactly once rounded through float32.
    std::mt19937_64 eng(11);
    Vec w(37);
    for (double& x : w) {
        double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
        x = 2.0 * u - 1.0;
    }
    Vec wf = decode_embedding(encode_embedding(w));
    for (size_t i = 0; i < w.size(); ++i)
        CHECK(wf[i] == static_cast<double>(static_cast<float>(w[i])));

    CHECK(decode_embedding(encode_embedding(Vec{})).empty());
}

TEST_CASE("decode_embedding rejects misaligned payloads") {
    // 3 bytes -> not a multiple of 4.
    const unsigned char raw[] = {1, 2, 3};
    CHECK_THROWS_AS(decode_embedding(base64_encode(raw, 3)), DataError);
}

TEST_CASE("dot and norm") {
    Vec a = {0.6, 0.8};
    Vec b = {1.0, 0.0};
    CHECK(dot(a, b) == 0.6);
    CHECK(dot(a, a) == Catch::Approx(1.0).margin(1e-15));
    CHECK(norm(b) == 1.0);
    CHECK(norm(Vec{3.0, 4.0}) == 5.0);
    CHECK_THROWS_AS(dot(a, Vec{1.0}), DataError);
}

TEST_CASE("format_fixed") {
    CHECK(format_fixed(1.0, 2) == "1.00");
    CHECK(format_fixed(2.345, 2) == "2.35");  // rounds, not truncates
    CHECK(format_fixed(-0.5, 4) == "-0.5000");
}
