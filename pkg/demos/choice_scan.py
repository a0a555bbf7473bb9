"""Which scenarios admit an improving trade? Compare the three diagnostics.

Run: python3 demos/choice_scan.py
"""

from osptrade import check_choice_conditions, choice_value_report
from osptrade.choice import find_bilateral
from osptrade.suites import choice_suite

print(f"{'scenario':<28}{'grid LP':>9}{'condition':>11}{'bilateral':>11}")
for sc in choice_suite():
    s = sc.scenario
    diag = check_choice_conditions(s)
    print(f"{sc.label:<28}{str(choice_value_report(s).choice_improves):>9}"
          f"{str(diag.hypotheses and diag.condition_i):>11}{str(find_bilateral(s) is not None):>11}")
