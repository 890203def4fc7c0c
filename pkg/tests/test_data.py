import numpy as np
import pytest

from fairshift import data
from fairshift.data import Dataset, SchemaConfig, ToySpec, make_toy
from fairshift.errors import EmptyDataError, PartitionError, SchemaError, ShapeError


BASIC_SCHEMA = dict(
    label_column="income",
    label_positive=">50K",
    sensitive_column="sex",
    sensitive_group0="Male",
    numeric_columns=["age"],
    categorical_columns=["workclass"],
)


def write_csv(tmp_path, rows, header="age,workclass,sex,income", name="data.csv"):
    path = tmp_path / name
    path.write_text("\n".join([header] + rows) + "\n")
    return path


class TestLoadCsv:
    def test_one_hot_and_standardization(self, tmp_path):
        path = write_csv(tmp_path, [
            "20,Private,Male,>50K",
            "30,State,Female,<=50K",
            "40,Private,Male,>50K",
        ])
        ds = data.load_csv(path, SchemaConfig(**BASIC_SCHEMA))
        assert ds.feature_names == ("age", "workclass=Private", "workclass=State")
        assert ds.X.shape == (3, 3)
        assert abs(ds.X[:, 0].mean()) <= 1e-12
        assert abs(ds.X[:, 0].std() - 1.0) <= 1e-10
        # one-hot block sums to one in every row
        assert np.array_equal(ds.X[:, 1:].sum(axis=1), np.ones(3))

    def test_label_and_sensitive_mapping(self, tmp_path):
        path = write_csv(tmp_path, [
            "20,Private,Male,>50K",
            "30,State,Female,<=50K",
            "40,Private,Female,>50K",
        ])
        ds = data.load_csv(path, SchemaConfig(**BASIC_SCHEMA))
        assert ds.y.tolist() == [1, 0, 1]
        assert ds.a.tolist() == [0, 1, 1]

    def test_missing_rows_dropped_and_counted(self, tmp_path):
        path = write_csv(tmp_path, [
            "20,Private,Male,>50K",
            "30,?,Female,<=50K",
            "40,Private,Male,>50K",
        ])
        ds = data.load_csv(path, SchemaConfig(**BASIC_SCHEMA))
        assert ds.n == 2
        assert "dropped_missing=1" in ds.provenance

    def test_missing_configured_column_raises(self, tmp_path):
        path = write_csv(tmp_path, ["20,Private,Male,>50K"])
        schema = SchemaConfig(**{**BASIC_SCHEMA, "numeric_columns": ["height"]})
        with pytest.raises(SchemaError):
            data.load_csv(path, schema)

    def test_all_rows_missing_raises(self, tmp_path):
        path = write_csv(tmp_path, ["?,Private,Male,>50K"])
        with pytest.raises(EmptyDataError):
            data.load_csv(path, SchemaConfig(**BASIC_SCHEMA))

    def test_more_than_two_sensitive_values_rejected(self, tmp_path):
        path = write_csv(tmp_path, [
            "20,Private,Male,>50K",
            "30,State,Female,<=50K",
            "40,Private,Other,>50K",
        ])
        with pytest.raises(SchemaError):
            data.load_csv(path, SchemaConfig(**BASIC_SCHEMA))

    def test_label_sensitive_collision_rejected(self):
        with pytest.raises(SchemaError):
            SchemaConfig(**{**BASIC_SCHEMA, "sensitive_column": "income"})

    def test_round_trip_through_save_and_load(self, tmp_path):
        path = write_csv(tmp_path, [
            "20,Private,Male,>50K",
            "31,State,Female,<=50K",
            "42,Private,Male,>50K",
            "53,State,Female,>50K",
            "64,Private,Male,<=50K",
            "25,State,Female,>50K",
        ])
        ds = data.load_csv(path, SchemaConfig(**BASIC_SCHEMA))
        out = tmp_path / "encoded.csv"
        data.save_dataset(ds, out)
        back = data.load_dataset(out)
        assert np.array_equal(back.X, ds.X)
        assert np.array_equal(back.y, ds.y)
        assert np.array_equal(back.a, ds.a)
        assert back.feature_names == ds.feature_names


class TestSplitByColumn:
    SCHEMA = dict(
        label_column="income",
        label_positive=">50K",
        sensitive_column="sex",
        sensitive_group0="Male",
        numeric_columns=["age"],
        categorical_columns=[],
        split_column="year",
        split_source=["2016"],
        split_target=["2018"],
    )
    HEADER = "age,sex,income,year"

    def test_partition_counts_match_file(self, tmp_path):
        path = write_csv(tmp_path, [
            "20,Male,>50K,2016",
            "30,Female,<=50K,2016",
            "40,Male,>50K,2018",
            "50,Female,>50K,2018",
            "60,Male,<=50K,2018",
        ], header=self.HEADER)
        src, tgt = data.split_by_column(path, SchemaConfig(**self.SCHEMA))
        assert src.n == 2 and tgt.n == 3

    def test_standardization_fit_on_source_only(self, tmp_path):
        path = write_csv(tmp_path, [
            "20,Male,>50K,2016",
            "30,Female,<=50K,2016",
            "40,Male,>50K,2016",
            "70,Female,>50K,2018",
            "90,Male,<=50K,2018",
        ], header=self.HEADER)
        src, tgt = data.split_by_column(path, SchemaConfig(**self.SCHEMA))
        assert abs(src.X[:, 0].mean()) <= 1e-12
        assert abs(tgt.X[:, 0].mean()) > 0.5  # shifted split stays shifted

    def test_empty_side_raises(self, tmp_path):
        path = write_csv(tmp_path, ["20,Male,>50K,2016"], header=self.HEADER)
        with pytest.raises(PartitionError):
            data.split_by_column(path, SchemaConfig(**self.SCHEMA))

    def test_split_without_configuration_raises(self, tmp_path):
        path = write_csv(tmp_path, ["20,Male,>50K,2016"], header=self.HEADER)
        with pytest.raises(SchemaError):
            data.split_by_column(path, SchemaConfig(**{**self.SCHEMA, "split_column": None}))


class TestDatasetInvariants:
    def test_non_binary_labels_rejected(self):
        with pytest.raises(ShapeError):
            Dataset(np.ones((2, 1)), [0, 2], [0, 1])

    def test_non_finite_features_rejected(self):
        with pytest.raises(ShapeError):
            Dataset(np.array([[np.nan]]), [0], [0])

    def test_row_count_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            Dataset(np.ones((3, 1)), [0, 1], [0, 1, 0])


def symmetric_spec():
    return ToySpec(
        mean0=(0.0, 0.0), mean1=(0.0, 0.0),
        cov0=((1.0, 0.0), (0.0, 1.0)), cov1=((1.0, 0.0), (0.0, 1.0)),
        label_coef=(1.5, -0.5), label_intercept=0.0, group1_shift=0.0,
    )


class TestMakeToy:
    def test_identical_groups_have_balanced_bayes_rule(self):
        spec = symmetric_spec()
        ds = make_toy(spec, n=2000, seed=0)
        yhat = (spec.bayes_logit(ds.X, ds.a) >= 0.0).astype(int)
        dp = abs(yhat[ds.a == 0].mean() - yhat[ds.a == 1].mean())
        assert dp <= 0.05

    def test_zero_samples_rejected(self):
        with pytest.raises(EmptyDataError):
            make_toy(symmetric_spec(), n=0, seed=0)

    def test_fixed_seed_is_bit_identical(self):
        one = make_toy(symmetric_spec(), n=100, seed=7)
        two = make_toy(symmetric_spec(), n=100, seed=7)
        assert np.array_equal(one.X, two.X)
        assert np.array_equal(one.y, two.y)
        assert np.array_equal(one.a, two.a)

    def test_group_shift_skews_labels(self):
        spec = ToySpec(
            mean0=(0.0,), mean1=(0.0,), cov0=((1.0,),), cov1=((1.0,),),
            label_coef=(0.5,), group1_shift=2.0,
        )
        ds = make_toy(spec, n=4000, seed=1)
        assert ds.y[ds.a == 1].mean() > ds.y[ds.a == 0].mean() + 0.2
