"""Verifier decision for a compiled run: timing, then consistency, then the CR test.

The three checks are nodes of a small langgraph pipeline. The first failing check
ends the run and names the rejection reason.
"""
import logging
from functools import lru_cache
from typing import Any, Dict, List, Optional, TypedDict

from langgraph.graph import END, StateGraph

from src.core.crcore import CRProtocolSpec
from src.models.cvpv import CompilerConfig, Reason, Transcript, Verdict, exact_ratio

logger = logging.getLogger(__name__)


class VerdictState(TypedDict):
    transcript: Transcript
    cfg: CompilerConfig
    spec: CRProtocolSpec
    reason: Optional[Reason]
    diagnostics: Dict[str, Any]


def timing_check_node(state: VerdictState) -> Dict[str, Any]:
    tau = state["cfg"].tau
    late: List[dict] = []
    for rnd in state["transcript"].rounds:
        for verifier, expected, actual in (("V0", rnd.expected_v0, rnd.actual_v0),
                                           ("V1", rnd.expected_v1, rnd.actual_v1)):
            if actual is None or abs(actual - expected) > tau:
                late.append({"block": rnd.block, "round": rnd.index, "verifier": verifier,
                             "expected": expected, "actual": actual})
    diagnostics = {**state["diagnostics"], "timing_failures": late}
    if late:
        logger.info(f"timing check failed on {len(late)} answer(s)", extra={"first": late[0]})
        return {"reason": Reason.TIMING, "diagnostics": diagnostics}
    return {"diagnostics": diagnostics}


def consistency_check_node(state: VerdictState) -> Dict[str, Any]:
    mismatches = [
        (rnd.block, rnd.index) for rnd in state["transcript"].rounds
        if tuple(rnd.ans_v0 or ()) != tuple(rnd.ans_v1 or ())
    ]
    diagnostics = {**state["diagnostics"], "mismatch_rounds": mismatches}
    if mismatches:
        logger.info(f"answers disagree in rounds {mismatches}")
        return {"reason": Reason.CONSISTENCY, "diagnostics": diagnostics}
    return {"diagnostics": diagnostics}


def crtest_check_node(state: VerdictState) -> Dict[str, Any]:
    transcript, cfg, spec = state["transcript"], state["cfg"], state["spec"]
    results = []
    for block, coins in enumerate(transcript.verifier_coins):
        rounds = transcript.block_rounds(block)
        result = spec.verify([r.ch for r in rounds], [r.ans_v0 for r in rounds], bytes.fromhex(coins))
        results.append(result)
    passed = sum(1 for r in results if r.accept)
    if cfg.mode == "seq-rapid-fire":
        needed = exact_ratio(cfg.alpha) * len(results)
        ok = passed >= needed
    else:
        ok = all(r.accept for r in results)
    diagnostics = {
        **state["diagnostics"],
        "cr_results": [r.model_dump() for r in results],
        "blocks_passed": passed,
        "vacuous": any(r.vacuous for r in results),
    }
    if not ok:
        logger.info(f"CR test failed: {passed}/{len(results)} block(s) passed")
        return {"reason": Reason.CRTEST, "diagnostics": diagnostics}
    return {"reason": Reason.NONE, "diagnostics": diagnostics}


def _next_or_end(next_node: str):
    def route(state: VerdictState) -> str:
        return END if state.get("reason") not in (None, Reason.NONE) else next_node
    return route


@lru_cache(maxsize=1)
def create_verdict_graph():
    """Builds and compiles the verdict pipeline once per process."""
    workflow = StateGraph(VerdictState)
    workflow.add_node("timing_check", timing_check_node)
    workflow.add_node("consistency_check", consistency_check_node)
    workflow.add_node("crtest_check", crtest_check_node)

    workflow.set_entry_point("timing_check")
    workflow.add_conditional_edges("timing_check", _next_or_end("consistency_check"))
    workflow.add_conditional_edges("consistency_check", _next_or_end("crtest_check"))
    workflow.add_edge("crtest_check", END)
    return workflow.compile()


def verdict_checks(transcript: Transcript, cfg: CompilerConfig, spec: CRProtocolSpec) -> Verdict:
    """Accept iff every answer is on time, both verifiers saw the same answers, and the CR test passes."""
    final = create_verdict_graph().invoke({
        "transcript": transcript, "cfg": cfg, "spec": spec,
        "reason": None, "diagnostics": {},
    })
    reason = final.get("reason") or Reason.NONE
    return Verdict(accept=reason == Reason.NONE, reason=reason, diagnostics=final["diagnostics"])
