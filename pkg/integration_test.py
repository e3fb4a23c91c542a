#!/usr/bin/env python3
"""
End-to-end check of the specmix command line.

Runs generate -> sample -> test -> learn -> hard-instance -> verify in a
scratch directory, each as a separate process, and checks exit codes and
outputs the way a shell pipeline would see them.
"""

import json
import os
import subprocess
import sys
import tempfile
from typing import Callable, List, Optional, Tuple

APP = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'app.py')


class IntegrationTester:
    def __init__(self, workdir: str, seed: int = 0):
        self.workdir = workdir
        self.seed = seed
        self.model_path = os.path.join(workdir, 'model.json')
        self.samples_path = os.path.join(workdir, 'samples.csv')
        self.pair_path = os.path.join(workdir, 'pair.json')

    def run_cli(self, *args) -> Tuple[int, str]:
        argv = [sys.executable, APP, *[str(a) for a in args], '--seed', str(self.seed)]
        completed = subprocess.run(argv, capture_output=True, text=True, timeout=600)
        return completed.returncode, completed.stdout

    def _json(self, stdout: str) -> Optional[dict]:
        try:
            return json.loads(stdout)
        except json.JSONDecodeError:
            return None

    def test_generate(self) -> bool:
        """Seeded model file, twice, byte-identical"""
        code, _ = self.run_cli('generate', '--k', 3, '--d', 1, '--delta', 4, '--out', self.model_path)
        if code != 0:
            print(f"❌ generate exited {code}")
            return False
        with open(self.model_path) as handle:
            first = handle.read()
        self.run_cli('generate', '--k', 3, '--d', 1, '--delta', 4, '--out', self.model_path)
        with open(self.model_path) as handle:
            second = handle.read()
        if first != second:
            print("❌ generate is not deterministic for a fixed seed")
            return False
        separation = json.loads(first)['separation']
        print(f"✅ Model generated (separation {separation:.3f})")
        return True

    def test_sample(self) -> bool:
        code, _ = self.run_cli('sample', '--model', self.model_path, '--n', 50_000,
                               '--format', 'csv', '--out', self.samples_path)
        if code != 0:
            print(f"❌ sample exited {code}")
            return False
        with open(self.samples_path) as handle:
            rows = sum(1 for _ in handle) - 1
        print(f"✅ {rows} samples written")
        return rows == 50_000

    def test_tester(self) -> bool:
        """Accept at a true mean, reject halfway between two means"""
        with open(self.model_path) as handle:
            means = sorted(m[0] for m in json.load(handle)['model']['means'])
        common = ['--samples', self.samples_path, '--k', 3, '--delta', 4, '--eps', 0.8,
                  '--tester-samples', 20_000]
        accept_code, _ = self.run_cli('test', '--mu-star', means[0], *common)
        reject_code, _ = self.run_cli('test', '--mu-star', (means[0] + means[1]) / 2, *common)
        if (accept_code, reject_code) != (0, 1):
            print(f"❌ tester exit codes {accept_code}/{reject_code}, expected 0/1")
            return False
        print("✅ Tester accepts at a mean and rejects between means")
        return True

    def test_learn(self) -> bool:
        code, out = self.run_cli('learn', '--model', self.model_path, '--eps', 0.8,
                                 '--candidate-multiplier', 3, '--tester-samples', 10_000)
        body = self._json(out)
        if code != 0 or body is None:
            print(f"❌ learn exited {code}")
            if body:
                print(f"   {body.get('error')}: {body.get('message')}")
            return False
        result = body['result']
        print(f"✅ Learned {len(result['means_hat'])} means "
              f"(max distance {body['truth_check']['max_distance']:.3f}, {result['tester_calls']} tester calls)")
        return True

    def test_hard_instance(self) -> bool:
        code, _ = self.run_cli('hard-instance', '--N', 6, '--t', 2, '--delta', 0.05, '--R', 1,
                               '--out', self.pair_path)
        if code != 0:
            print(f"❌ hard-instance exited {code}")
            return False
        with open(self.pair_path) as handle:
            pair = json.load(handle)
        print(f"✅ Moment-matched pair built (residual {max(pair['moment_residuals']):.2e}, "
              f"TV {pair['tv_numeric']:.2e})")
        return True

    def test_verify(self) -> bool:
        code, out = self.run_cli('verify', '--suite', 'chi2', '--suite', 'ball', '--suite', 'norm_lb',
                                 '--fixtures', 100)
        body = self._json(out) or {}
        for name, suite in body.get('suites', {}).items():
            marker = '✅' if suite['passed'] else '❌'
            print(f"{marker} verify suite {name}")
        return code == 0

    def run_full_integration_test(self) -> bool:
        """Run complete integration test suite"""
        print("🚀 Starting specmix CLI integration test")
        print("=" * 50)
        steps: List[Tuple[str, Callable[[], bool]]] = [
            ('Generating a model', self.test_generate),
            ('Sampling', self.test_sample),
            ('Testing candidate points', self.test_tester),
            ('Learning the means', self.test_learn),
            ('Building a hard instance', self.test_hard_instance),
            ('Running verification suites', self.test_verify),
        ]
        for number, (title, step) in enumerate(steps, start=1):
            print(f"\n{number}. {title}:")
            if not step():
                print(f"\n❌ Integration test FAILED at step {number}.")
                return False
        print("\n" + "=" * 50)
        print("🎉 Integration test PASSED!")
        return True


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    with tempfile.TemporaryDirectory() as workdir:
        success = IntegrationTester(workdir, seed).run_full_integration_test()
    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
