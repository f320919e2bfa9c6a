"""Reference model host for the anomattr external-model wire protocol."""
from .hosting import (KINDS, HostError, build_estimator, load_model,
                      read_csv_dataset, serve, train_and_save,
                      write_csv_dataset)
from .fetch import FETCHERS, fetch_boston, fetch_california, fetch_diabetes

__version__ = "0.1.0"
