"""
Run the shipped scalar example from both starting points, print the reproduction
tables and the estimated geometric rates, and compare the corollary with the
classical extragradient method on the two-dimensional demo.

Traces are written to --out_dir (one CSV and one summary JSON per run).
"""
import os
import sys
import argparse
import logging

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from exgrad import harness

parser = argparse.ArgumentParser()
parser.add_argument('--out_dir', type=str, default='runs')
parser.add_argument('--workers', type=int, default=None)
parser.add_argument('--v', action='store_true', default=False)
args = parser.parse_args()

logging.basicConfig(
    level=logging.INFO if args.v else logging.WARNING,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

os.makedirs(args.out_dir, exist_ok=True)

for preset in ('paper-35', 'paper-neg4'):
    print(harness.reproduce(preset))
    print()

names = ['paper-35', 'paper-neg4', 'corollary-demo', 'korpelevich-demo']
specs = [harness.load_preset(name) for name in names]
outs = [os.path.join(args.out_dir, f'{name}.csv') for name in names]
outcomes = harness.run_many(specs, outs, args.workers)

for name, outcome in zip(names, outcomes):
    rate = outcome.summary['rate']
    ratio = 'n/a' if rate is None else f"{rate['geometric_ratio']:.4f}"
    print(f'{name:>18}: {outcome.result.status.value:>10}, {outcome.result.iterations:4d} iterations, ratio {ratio}')
    logger.info(f'{name}: trace {outcome.trace_path}, summary {outcome.summary_path}')
