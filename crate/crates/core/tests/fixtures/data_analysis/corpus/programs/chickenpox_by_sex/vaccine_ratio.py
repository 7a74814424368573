import csv

def chickenpox_by_sex(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    male = [r for r in rows if r["SEX"] == "1"]
    female = [r for r in rows if r["SEX"] == "2"]
    male_vax = [r for r in male if int(r["P_NUMVRC"]) == 1]
    female_vax = [r for r in female if int(r["P_NUMVRC"]) >= 1]

    def ratio(group):
        had = sum(1 for r in group if r["HAD_CPOX"] == "1")
        not_had = sum(1 for r in group if r["HAD_CPOX"] == "2")
        return had / not_had

    return {"male": ratio(male_vax), "female": ratio(female_vax)}

print(chickenpox_by_sex("nhis.csv"))
