from .runner import BacktestRunner, RunResult, compare_runs
__all__=['BacktestRunner','RunResult','compare_runs']
