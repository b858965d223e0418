"""JSON and CSV report writers."""

import csv
import json

import numpy as np

from .storage import REPORT_FORMAT, FormatError, check_format

def _plain(value):
    """json.dump fallback for numpy scalars and arrays."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError("%r is not JSON serializable" % (value,))

def dumps_report(report):
    return json.dumps(report, indent=2, sort_keys=True, default=_plain)

def write_report(path, report):
    """Write a run report to ``path`` in JSON format."""
    with open(path, 'w', encoding='utf-8') as fhandle:
        json.dump(report, fhandle, indent=2, sort_keys=True, default=_plain)

def read_report(path):
    with open(path, encoding='utf-8') as fhandle:
        try:
            report = json.load(fhandle)
        except ValueError as err:
            raise FormatError("%s: %s" % (path, err)) from None
    check_format(report, REPORT_FORMAT, path)
    return report

def trial_rows(report):
    """One flat row per trial of every experiment block that has trials."""
    rows = []
    for block in report.get('experiments', []):
        for result in block.get('results', []):
            for index, trial in enumerate(result.get('rows', [])):
                row = {'block': block['name'], 'experiment': result.get('experiment'),
                        'p': result.get('p'), 'trial': index}
                row.update({k: v for k, v in trial.items()
                    if not isinstance(v, (dict, list))})
                rows.append(row)
    return rows

def write_rows(path, rows):
    """Write ``rows`` (dicts) as CSV; the header is the union of their keys in
    order of first appearance. No rows yields an empty file."""
    fields = []
    for row in rows:
        fields.extend(k for k in row if k not in fields)
    with open(path, 'w', encoding='utf-8', newline='') as fhandle:
        if not fields:
            return
        writer = csv.DictWriter(fhandle, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _plain(v) if isinstance(v, (np.generic, np.ndarray))
                else v for k, v in row.items()})
