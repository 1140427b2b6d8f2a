// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "nextloc/error.hpp"
#include "nextloc/fileio.hpp"
#include "nextloc/hash.hpp"
#include "nextloc/prompts.hpp"
#include "synthetic.hpp"

using namespace nextloc;

namespace {

std::vector<Visit> stays(const Json& rows) {
    std::vector<Visit> out;
    for (const auto& r : rows) {
        out.push_back(testsupport::label_visit(r[0].get<std::string>(), r[1].get<std::string>(), r[2].get<std::string>()));
    }
    return out;
}

PredictionInstance query(const Json& q) {
    PredictionInstance inst;
    inst.instance_id = "ref";
    inst.user_id = "u";
    inst.historical = stays(q["historical"]);
    inst.contextual = stays(q["contextual"]);
    inst.target = testsupport::label_visit("6 PM", "Sunday", "unknown");
    return inst;
}

Exemplar exemplar(const Json& e) {
    Exemplar ex;
    ex.historical = stays(e["historical"]);
    ex.contextual = stays(e["contextual"]);
    ex.prediction = e["prediction"].get<std::vector<std::string>>();
    if (e.contains("reason")) ex.reason = e["reason"].get<std::string>();
    return ex;
}

const Json& inputs() {
    static const Json j = Json::parse(read_file(testsupport::fixture("prompts/reference_inputs.json")));
    return j;
}

std::string golden(const char* name) { return read_file(testsupport::fixture(std::string("prompts/") + name)); }

}  // namespace

TEST_CASE("zero-shot golden") {
    const auto p = render(query(inputs()["zero_shot"]["query"]), Shots::Zero);
    CHECK(p.text == golden("zero_shot.golden.txt"));
    CHECK(p.h_count == 15);
    CHECK(p.c_count == 6);
    CHECK(p.content_hash == sha256_hex(p.text));
}

TEST_CASE("one-shot golden") {
    const auto& in = inputs()["one_shot"];
    const auto p = render(query(in["query"]), Shots::One, {exemplar(in["exemplar"])});
    CHECK(p.text == golden("one_shot.golden.txt"));
}

TEST_CASE("few-shot golden") {
    const auto& in = inputs()["few_shot"];
    std::vector<Exemplar> ex;
    for (const auto& e : in["examples"]) ex.push_back(exemplar(e));
    const auto p = render(query(in["query"]), Shots::Few, ex);
    CHECK(p.text == golden("few_shot.golden.txt"));
}

TEST_CASE("template files on disk equal the built-in set") {
    const auto dir = std::filesystem::path(NEXTLOC_FIXTURE_DIR) / ".." / ".." / "templates";
    const auto disk = TemplateSet::from_directory(dir);
    const auto& b = TemplateSet::builtin();
    CHECK(disk.zero_shot.text == b.zero_shot.text);
    CHECK(disk.one_shot.text == b.one_shot.text);
    CHECK(disk.few_shot.text == b.few_shot.text);
    CHECK(disk.few_shot_example.text == b.few_shot_example.text);
}

TEST_CASE("placeholders must match exactly") {
    const PromptTemplate t{"a {{x}} b {{y}}"};
    CHECK(t.fill({{"x", "1"}, {"y", "2"}}) == "a 1 b 2");
    CHECK_THROWS_AS(t.fill({{"x", "1"}}), ConfigError);
    CHECK_THROWS_AS(t.fill({{"x", "1"}, {"y", "2"}, {"z", "3"}}), ConfigError);
    CHECK_THROWS_AS(PromptTemplate{"{{x"}.fill({{"x", "1"}}), ConfigError);
}

TEST_CASE("exemplar count is enforced") {
    const auto inst = testsupport::random_instance(1, 0, 20);
    CHECK_THROWS_AS(render(inst, Shots::One), ConfigError);
    CHECK_THROWS_AS(render(inst, Shots::Few, {make_exemplar(inst)}), ConfigError);
    CHECK(required_exemplars(Shots::Few) == 2);
    CHECK(parse_shots("few") == Shots::Few);
    CHECK_THROWS_AS(parse_shots("two"), ConfigError);
}

TEST_CASE("stay formatting") {
    const auto v = testsupport::label_visit("10:49 PM", "Sunday", "4b80bafef964a520ee8830e3");
    CHECK(format_stay(v, TimeFormat::Minute) == "['10:49 PM', 'Sunday', '4b80bafef964a520ee8830e3']");
    CHECK(format_stay(v, TimeFormat::Hour) == "['10 PM', 'Sunday', '4b80bafef964a520ee8830e3']");
    CHECK(format_stay_block({}, TimeFormat::Hour) == "{}");
    CHECK(format_stay_inline({v, v}, TimeFormat::Hour).find("], [") != std::string::npos);
    CHECK(format_stay_block({v, v}, TimeFormat::Hour).find("],\n  [") != std::string::npos);
}

TEST_CASE("exemplars: true target first, then frequent others") {
    PredictionInstance inst;
    inst.historical = {testsupport::label_visit("1 PM", "Monday", "a"), testsupport::label_visit("2 PM", "Monday", "b"),
                       testsupport::label_visit("3 PM", "Monday", "a")};
    inst.contextual = {testsupport::label_visit("4 PM", "Monday", "t"), testsupport::label_visit("5 PM", "Monday", "c")};
    inst.target = testsupport::label_visit("6 PM", "Monday", "t");
    const auto ex = make_exemplar(inst);
    CHECK(ex.prediction == std::vector<std::string>{"t", "a", "c", "b"});
    CHECK_FALSE(ex.reason.empty());
}

TEST_CASE("exemplar picking prefers the same user and is seeded") {
    std::vector<PredictionInstance> pool;
    for (std::size_t i = 0; i < 40; ++i) pool.push_back(testsupport::random_instance(2, i, 25));
    std::map<std::string, std::vector<PredictionInstance>> by_user;
    for (const auto& p : pool) by_user[p.user_id].push_back(p);
    auto target = testsupport::random_instance(9, 1000, 25);
    target.user_id = pool[3].user_id;

    const auto a = pick_exemplars(target, by_user, pool, 2, 42);
    const auto b = pick_exemplars(target, by_user, pool, 2, 42);
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) CHECK(a[i].prediction == b[i].prediction);
    // Only one own instance exists, so the second comes from another user.
    CHECK(a[0].prediction == make_exemplar(pool[3]).prediction);
    CHECK(a[1].historical != pool[3].historical);
    CHECK(pick_exemplars(target, {}, {}, 2, 42).empty());
}
