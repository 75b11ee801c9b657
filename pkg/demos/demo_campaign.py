"""A miniature Monte-Carlo campaign over the hoop benchmark.

The full benchmark solves a hundred random cases per grid size; this
demo runs a handful so it finishes in seconds, and prints the same two
statistics tables the command line tool writes.  The campaign is keyed
by (seed, scenario, K, attempt), so re-running it, or spreading it over
workers, reproduces the books bit for bit.

Usage: python demo_campaign.py [workers]
"""
import sys

from stctraj.harness import CampaignSpec, run_campaign


def main(workers=1):
    spec = CampaignSpec(scenario=1, K_list=(15, 20), cases_per_K=3, seed=1)
    result = run_campaign(spec, workers=workers)
    print(result.runtime_table())
    print(result.clipping_table())
    print(f"{result.n_converged} converged, {result.n_failed} failed attempts")
    print()
    print("first manifest lines (the per-case ledger the CLI writes):")
    for line in result.manifest().splitlines()[:8]:
        print(f"  {line}")
    return 0


if __name__ == "__main__":
    sys.exit(main(int(sys.argv[1]) if len(sys.argv) > 1 else 1))
