import json
import math

import numpy as np
import pytest

from database.result_store import ADVERSARY_COLUMNS, RESULT_COLUMNS, ResultStore
from scheduler.flowtime import simulate_flow
from utils.errors import InstanceError
from utils.helpers import (
    load_config, parse_float_list, ratio, relative_close, save_json, to_builtin, tolerance_for,
)
from utils.logger import StructuredLogger, get_logger, initialize_global_logger


class TestHelpers:
    """Test cases for helper functions."""

    def test_parse_float_list(self):
        """Test comma lists with fractions."""
        assert parse_float_list("1,1/2, 0.25") == [1.0, 0.5, 0.25]
        assert parse_float_list(None) == []
        with pytest.raises(ValueError):
            parse_float_list("1,,2")

    def test_tolerance(self):
        """Test relative tolerance with an absolute floor."""
        assert tolerance_for(1000.0) == pytest.approx(1e-6)
        assert tolerance_for(0.0) == 1e-12
        assert relative_close(1.0 + 1e-10, 1.0)
        assert not relative_close(1.001, 1.0)

    def test_ratio(self):
        """Test ratios with a non-positive denominator."""
        assert ratio(6.0, 3.0) == 2.0
        assert math.isnan(ratio(1.0, 0.0))
        assert math.isnan(ratio(1.0, None))

    def test_to_builtin(self):
        """Test numpy values and non-finite floats."""
        data = to_builtin({'a': np.float64(1.5), 'b': np.array([1, 2]), 'c': math.inf, 'd': math.nan, 1: 'x'})
        assert data == {'a': 1.5, 'b': [1, 2], 'c': 'inf', 'd': None, '1': 'x'}

    def test_save_json_is_stable(self, tmp_path):
        """Test byte-identical output for equal inputs."""
        first, second = tmp_path / 'a.json', tmp_path / 'b.json'
        save_json({'b': 1, 'a': [np.int64(2)]}, str(first))
        save_json({'a': [2], 'b': 1}, str(second))
        assert first.read_bytes() == second.read_bytes()

    def test_load_config(self, temp_config_file, tmp_path):
        """Test loading a config and a missing file."""
        config = load_config(temp_config_file)
        assert config['experiment']['eps'] == 0.5
        assert load_config(str(tmp_path / 'nope.yaml')) == {}


class TestResultStore:
    """Test cases for ResultStore."""

    def test_instance_round_trip(self, mock_config, two_job_instance):
        """Test saving and loading an instance under the output root."""
        store = ResultStore(mock_config)
        path = store.save_instance(two_job_instance, 'instances/two.json')
        assert path.exists()
        assert store.load_instance('instances/two.json') == two_job_instance
        assert store.list_instances('instances') == [path]

    def test_missing_instance(self, mock_config):
        """Test a missing instance file."""
        with pytest.raises(InstanceError):
            ResultStore(mock_config).load_instance('absent.json')

    def test_run_document(self, mock_config, two_job_instance):
        """Test run documents need an instance and a trace."""
        store = ResultStore(mock_config)
        trace = simulate_flow(two_job_instance, 0.5).trace
        store.save_run({'engine': 'flow', 'instance': two_job_instance.to_dict(),
                        'trace': trace.to_dict()}, 'run.json')
        run = store.load_run('run.json')
        assert ResultStore.trace_of(run).to_dict() == trace.to_dict()

        store.save_document({'engine': 'flow'}, 'partial.json')
        with pytest.raises(InstanceError):
            store.load_run('partial.json')

    def test_table_columns(self, mock_config):
        """Test the fixed column order and empty cells."""
        store = ResultStore(mock_config)
        store.save_table([{'instance_id': 'x', 'alg_cost': 4.0}], 'table.csv')
        frame = store.load_table('table.csv')
        assert list(frame.columns) == RESULT_COLUMNS
        assert frame.loc[0, 'alg_cost'] == 4.0
        assert math.isnan(frame.loc[0, 'opt'])

        store.save_table([{'adversary': 'lb1', 'ratio': 6.0}], 'adv.csv', columns=ADVERSARY_COLUMNS)
        assert list(store.load_table('adv.csv').columns) == ADVERSARY_COLUMNS

    def test_trace_csv(self, mock_config, six_unit_jobs):
        """Test the trace CSV export."""
        store = ResultStore(mock_config)
        store.save_trace_csv(simulate_flow(six_unit_jobs, 0.5).trace, 'trace.csv')
        frame = store.load_table('trace.csv')
        assert len(frame) == 6
        assert set(frame['outcome']) == {'completed', 'rejected_rule1', 'rejected_rule2'}

    def test_absolute_paths(self, mock_config, tmp_path, two_job_instance):
        """Test that absolute paths bypass the root."""
        target = tmp_path / 'elsewhere' / 'inst.json'
        assert ResultStore(mock_config).save_instance(two_job_instance, str(target)) == target


class TestStructuredLogger:
    """Test cases for the structured logger."""

    def test_streams(self, mock_config, tmp_path):
        """Test run, audit and performance entries land in their files."""
        logger = StructuredLogger(mock_config, session_id='test')
        logger.log_run({'engine': 'flow', 'n': 2, 'alg_cost': 4.0})
        logger.log_verification('flow n=2', {'certified': True, 'checked_count': 3, 'violations': []})
        logger.log_performance({'instances': 2, 'threads': 1, 'processing_time': 0.5})
        for handler in logger.audit_logger.handlers + logger.perf_logger.handlers:
            handler.flush()

        summary = logger.get_log_summary()
        assert summary['entries_written'] == 3
        assert summary['log_dir'] == str(tmp_path / 'log')
        audit = (tmp_path / 'log' / 'audit' / 'audit_test.log').read_text()
        assert 'certified' in audit
        performance = (tmp_path / 'log' / 'performance_test.log').read_text()
        assert json.loads(performance.split('| Data: ')[1])['threads'] == 1

    def test_global_logger(self, mock_config):
        """Test the process-wide instance."""
        logger = initialize_global_logger(mock_config, session_id='global')
        assert get_logger() is logger
        assert logger.session_id == 'global'

    def test_parse_size(self, mock_config):
        """Test size strings."""
        logger = StructuredLogger(mock_config, session_id='sizes')
        assert logger._parse_size('10MB') == 10 * 1024 * 1024
        assert logger._parse_size('2KB') == 2048
        assert logger._parse_size('100') == 100
