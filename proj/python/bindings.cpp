#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "panelsynth/actions.hpp"
#include "panelsynth/cli.hpp"
#include "panelsynth/config.hpp"
#include "panelsynth/dataset_io.hpp"
#include "panelsynth/errors.hpp"
#include "panelsynth/metrics.hpp"
#include "panelsynth/mock_backend.hpp"
#include "panelsynth/orchestrator.hpp"
#include "panelsynth/templates.hpp"

namespace py = pybind11;
using namespace panelsynth;

namespace {

ActionKind action_named(const std::string &name) {
    const auto kind = action_from_tag(name);
    if (!kind) throw py::value_error("unknown action tag '" + name + "'");
    return *kind;
}

py::dict action_dict(const ActionSet &set) {
    py::dict out;
    for (const auto &[kind, body] : set.entries()) out[py::str(std::string(tag_name(kind)))] = body;
    return out;
}

py::object fraction(const Fraction &f) {
    return py::module_::import("fractions").attr("Fraction")(f.num, f.den);
}

py::dict conversation_dict(const Conversation &conv) {
    py::list turns;
    for (const auto &t : conv.turns) {
        py::dict d;
        d["index"] = t.index;
        d["instruction"] = t.instruction;
        d["answer"] = t.answer;
        d["origin"] = t.origin == TurnOrigin::Seed ? "seed" : "chairman";
        turns.append(d);
    }
    py::dict out;
    out["seed_id"] = conv.seed_id;
    out["status"] = conv.complete() ? "complete" : "failed";
    out["failure_reason"] = conv.failure_reason;
    out["turns"] = turns;
    return out;
}

}  // namespace

PYBIND11_MODULE(_panelsynth, m) {
    m.doc() = "Multi-agent dialogue synthesis core";

    auto base = py::register_exception<Error>(m, "PanelsynthError", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<BackendError>(m, "BackendError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    m.def(
        "parse_actions",
        [](const std::string &raw, std::optional<std::string> required) {
            const auto result = required ? parse_actions(raw, action_named(*required)) : scan_actions(raw);
            py::list warnings;
            for (const auto &w : result.warnings) {
                warnings.append(py::make_tuple(std::string(tag_name(w.action)), w.offset));
            }
            return py::make_tuple(action_dict(result.actions), warnings);
        },
        py::arg("raw"), py::arg("required") = py::none(),
        "Parse action tags; returns (actions, duplicate_warnings).");

    m.def(
        "render_actions",
        [](const std::map<std::string, std::string> &actions) {
            ActionSet set;
            for (const auto &[name, body] : actions) set.insert(action_named(name), body);
            return render_actions(set);
        },
        py::arg("actions"));

    m.def("seed_content_id", &seed_content_id, py::arg("instruction"), py::arg("response") = py::none());

    m.def(
        "diversity_by_round",
        [](const std::vector<std::vector<std::set<std::string>>> &rounds) {
            std::vector<std::vector<TagSet>> in;
            for (std::size_t r = 0; r < rounds.size(); ++r) {
                auto &row = in.emplace_back();
                for (std::size_t i = 0; i < rounds[r].size(); ++i) {
                    row.push_back({{"r" + std::to_string(r) + "/" + std::to_string(i), 0}, rounds[r][i]});
                }
            }
            py::list out;
            for (const auto &rn : diversity_by_round(in).rounds) out.append(py::make_tuple(rn.new_tags, fraction(rn.ratio)));
            return out;
        },
        py::arg("rounds"), "Per round: (new tag count, exact share of all unique tags).");

    m.def(
        "difficulty_by_round",
        [](const std::vector<std::vector<std::optional<std::string>>> &rounds) {
            std::vector<std::vector<std::optional<Difficulty>>> in;
            for (const auto &r : rounds) {
                auto &row = in.emplace_back();
                for (const auto &label : r) {
                    if (!label) {
                        row.emplace_back();
                        continue;
                    }
                    const auto d = difficulty_from_string(*label);
                    if (!d) throw py::value_error("unknown difficulty '" + *label + "'");
                    row.push_back(d);
                }
            }
            py::list out;
            for (const auto &h : difficulty_by_round(in)) {
                py::dict d;
                d["easy"] = h.easy;
                d["medium"] = h.medium;
                d["hard"] = h.hard;
                d["unclassified"] = h.unclassified;
                d["hard_share"] = fraction(h.hard_share);
                out.append(d);
            }
            return out;
        },
        py::arg("rounds"));

    m.def("render_difficulty_prompt", [](const std::string &instruction) {
        return render_difficulty_prompt(default_templates().difficulty_judge, instruction);
    });

    m.def("parse_judge_output", [](const std::string &raw) {
        const auto rec = parse_judge_output(raw, {"", 0});
        py::dict d;
        d["intent"] = rec.intent;
        d["knowledge"] = rec.knowledge;
        d["difficulty"] = to_string(rec.difficulty);
        return d;
    });

    m.def("load_dialogues", [](const std::string &path) {
        py::list out;
        for (const auto &rec : load_dialogues(path)) out.append(py::make_tuple(rec.id, rec.turns));
        return out;
    });

    m.def("check_file", [](const std::string &path) {
        std::vector<std::pair<std::size_t, std::string>> out;
        for (const auto &v : check_file(path)) out.emplace_back(v.line, v.message);
        return out;
    });

    m.def(
        "simulate",
        [](const std::string &instruction, std::optional<std::string> response, const std::string &script_json,
           int turns, int reviewers, const std::string &seed_id) {
            auto cfg = default_app_config().run;
            cfg.total_turns = turns;
            set_reviewer_count(cfg, reviewers);
            validate_run_config(cfg);
            GatewayOptions opts;
            opts.sleep = [](std::chrono::milliseconds) {};
            auto gateway = std::make_shared<Gateway>(script_mock(parse_mock_script(script_json)), opts,
                                                     std::make_shared<CallLog>());
            const auto pool = GatewayPool::single(gateway);
            const auto templates = default_templates();
            const SeedInstruction seed{seed_id.empty() ? seed_content_id(instruction, response) : seed_id, instruction,
                                       response, "python"};
            DialogueResult result;
            {
                py::gil_scoped_release release;
                result = run_dialogue(seed, {cfg, templates, pool});
            }
            auto d = conversation_dict(result.conversation);
            d["export_line"] = result.conversation.complete() ? py::cast(export_line(result.conversation)) : py::none();
            return d;
        },
        py::arg("instruction"), py::arg("response") = py::none(), py::arg("script_json"), py::arg("turns") = 3,
        py::arg("reviewers") = 3, py::arg("seed_id") = "",
        "Run one dialogue against a scripted mock backend.");

    m.def(
        "run_cli",
        [](const std::vector<std::string> &args) {
            std::vector<std::string> full{"panelsynth"};
            full.insert(full.end(), args.begin(), args.end());
            std::vector<const char *> argv;
            for (const auto &a : full) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");

    m.attr("__version__") = PANELSYNTH_VERSION;
}
