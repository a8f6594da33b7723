#include "doctest.h"
#include "dtb/scene.hpp"
#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"
#include "scene_server.hpp"

using namespace dtb;
using nlohmann::json;

namespace {

struct Running {
    std::shared_ptr<SessionManager> sessions = std::make_shared<SessionManager>();
    std::unique_ptr<SceneServer> server;
    int port = 0;

    Running() {
        const auto& f = testing::f1();
        sessions->add_dataset(Dataset::make("f1", StoreData{f.atlas, f.biological, f.dtb, f.dti, std::nullopt}));
        server = std::make_unique<SceneServer>(sessions, 2);
        port = server->start("127.0.0.1", 0);
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }
};

json body_of(const httplib::Result& r) {
    REQUIRE(r);
    return json::parse(r->body);
}

}  // namespace

TEST_SUITE("server") {
    TEST_CASE("session lifecycle over HTTP") {
        Running srv;
        auto cli = srv.client();

        auto datasets = body_of(cli.Get("/datasets"));
        REQUIRE(datasets.size() == 1);
        CHECK(datasets[0].at("id") == "f1");
        CHECK(datasets[0].at("n_functional_regions") == 92);

        auto created = cli.Post("/sessions", R"({"dataset_id":"f1"})", "application/json");
        REQUIRE(created);
        CHECK(created->status == 201);
        const std::string id = json::parse(created->body).at("session_id");

        auto snap = body_of(cli.Get("/sessions/" + id + "/snapshot"));
        CHECK(snap.at("spheres").size() == 92);
        auto cmp = body_of(cli.Get("/sessions/" + id + "/snapshot?compare=1&t=119&tau=0.95"));
        CHECK(cmp.at("spheres").size() == 184);
        CHECK(cmp.at("time_index") == 119);
        auto state = body_of(cli.Get("/sessions/" + id));
        CHECK(state.at("threshold_tau") == 0.95);
        CHECK(state.at("compare_mode") == true);

        auto sel = body_of(cli.Post("/sessions/" + id + "/select", R"({"label":16})", "application/json"));
        CHECK(sel.at("selected_regions") == json::array({16}));
        auto nav = body_of(cli.Get("/sessions/" + id + "/navigate?from=16"));
        CHECK_FALSE(nav.empty());
        auto reset = body_of(cli.Post("/sessions/" + id + "/reset", "", "application/json"));
        CHECK(reset.at("selected_regions").empty());
        CHECK(reset.at("visited_regions") == json::array({16}));

        auto sliced = body_of(cli.Get("/sessions/" + id + "/snapshot?slice_axis=horizontal&slice_coord=0"));
        CHECK(sliced.at("slice").at("plane").at("axis") == "horizontal");
    }

    TEST_CASE("dataset-level endpoints") {
        Running srv;
        auto cli = srv.client();
        auto slice = body_of(cli.Get("/slice?axis=coronal&coord=0&t=3"));
        CHECK(slice.at("axis") == "coronal");
        CHECK(slice.at("t") == 3);
        auto cmp = body_of(cli.Get("/compare?scope=all"));
        CHECK(cmp.at("lag") == 3);
        auto r = cli.Get("/bundles");
        REQUIRE(r);
        CHECK(r->status == 404);
    }

    TEST_CASE("errors carry a code and message") {
        Running srv;
        auto cli = srv.client();
        auto unknown_ds = cli.Post("/sessions", R"({"dataset_id":"zz"})", "application/json");
        REQUIRE(unknown_ds);
        CHECK(unknown_ds->status == 404);
        CHECK(json::parse(unknown_ds->body).at("code") == "not_found");

        auto bad_json = cli.Post("/sessions", "{oops", "application/json");
        REQUIRE(bad_json);
        CHECK(bad_json->status == 400);

        auto missing = cli.Get("/sessions/none/snapshot");
        REQUIRE(missing);
        CHECK(missing->status == 404);

        const std::string id = body_of(cli.Post("/sessions", R"({"dataset_id":"f1"})", "application/json")).at("session_id");
        auto bad_t = cli.Get("/sessions/" + id + "/snapshot?t=9999");
        REQUIRE(bad_t);
        CHECK(bad_t->status == 400);
        CHECK(json::parse(bad_t->body).at("code") == "out_of_bounds");
        auto bad_label = cli.Post("/sessions/" + id + "/select", R"({"label":999})", "application/json");
        REQUIRE(bad_label);
        CHECK(bad_label->status == 404);
        auto bad_axis = cli.Get("/slice?axis=oblique&coord=0");
        REQUIRE(bad_axis);
        CHECK(bad_axis->status == 400);
        auto no_route = cli.Get("/teleport");
        REQUIRE(no_route);
        CHECK(no_route->status == 404);
        CHECK(json::parse(no_route->body).at("code") == "not_found");
    }
}
