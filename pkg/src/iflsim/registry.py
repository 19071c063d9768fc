"""Server-side client registry and device & asset metadata catalog.

Handles FL client registration, cohort search criteria posting, catalog
queries, and the collaboration-compatibility predicate. The catalog can be
persisted as a single JSON document (written atomically) and reloaded at
startup. No operation here ever accepts or returns dataset samples.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from typing import Iterator, Optional

from pydantic import Field, field_validator, model_validator

from .domain import Asset, AspectType, AssetType, EdgeDevice, FrozenModel, MLModelSpec, validate_hierarchy
from .errors import ConflictingMetadata, IflError, UnknownClient, ValidationFailed


class Organization(FrozenModel):
    id: str = Field(min_length=1)
    name: str = ""
    industry: str = ""


class RegistrationRequest(FrozenModel):
    organization: Organization
    devices: tuple[EdgeDevice, ...] = ()
    assets: tuple[Asset, ...] = ()
    assetTypes: tuple[AssetType, ...] = ()
    aspectTypes: tuple[AspectType, ...] = ()


class CohortSearchCriteria(FrozenModel):
    clientId: str
    allowOrganizations: Optional[tuple[str, ...]] = None
    blockOrganizations: tuple[str, ...] = ()
    industries: Optional[tuple[str, ...]] = None
    assetTypeIds: Optional[tuple[str, ...]] = None
    aspectTypeIds: Optional[tuple[str, ...]] = None

    @field_validator("allowOrganizations", "blockOrganizations", "industries", "assetTypeIds", "aspectTypeIds")
    @classmethod
    def _canonical(cls, ids):
        return ids if ids is None else tuple(sorted(set(ids)))

    @model_validator(mode="after")
    def _allow_block_disjoint(self) -> "CohortSearchCriteria":
        if self.allowOrganizations is not None:
            overlap = set(self.allowOrganizations) & set(self.blockOrganizations)
            if overlap:
                raise ValueError(f"allow and block sets overlap: {sorted(overlap)}")
        return self


class Catalog(FrozenModel):
    """Keyed stores for all registered metadata records."""

    organizations: dict[str, Organization] = {}
    devices: dict[str, EdgeDevice] = {}
    assets: dict[str, Asset] = {}
    assetTypes: dict[str, AssetType] = {}
    aspectTypes: dict[str, AspectType] = {}
    modelSpecs: dict[str, MLModelSpec] = {}
    criteria: dict[str, CohortSearchCriteria] = {}


class ClientMetadata(FrozenModel):
    """The per-client facts the compatibility filters match against."""

    organizationId: str
    industry: str
    assetTypeIds: tuple[str, ...]
    aspectTypeIds: tuple[str, ...]


def criteria_accepts(criteria: Optional[CohortSearchCriteria], other: ClientMetadata) -> bool:
    """One-directional check: does this client's criteria accept a counterpart
    with the given metadata? Absent criteria accept everyone."""
    if criteria is None:
        return True
    if other.organizationId in criteria.blockOrganizations:
        return False
    if criteria.allowOrganizations is not None and other.organizationId not in criteria.allowOrganizations:
        return False
    if criteria.industries is not None and other.industry not in criteria.industries:
        return False
    if criteria.assetTypeIds is not None and not set(criteria.assetTypeIds) & set(other.assetTypeIds):
        return False
    if criteria.aspectTypeIds is not None and not set(criteria.aspectTypeIds) & set(other.aspectTypeIds):
        return False
    return True


class Registry:
    """Client registry with serialized writers and lock-free readers over an
    immutable catalog snapshot; mutations swap the snapshot atomically."""

    def __init__(self, path: Optional[str] = None):
        self._path = path
        self._lock = threading.Lock()
        self._catalog = Catalog()
        if path is not None and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                self._catalog = Catalog.model_validate_json(fh.read())

    @property
    def catalog(self) -> Catalog:
        return self._catalog

    # -- registration -----------------------------------------------------

    def register_client(self, req: RegistrationRequest) -> str:
        """Register an organization with its devices, assets, and metadata
        definitions. Idempotent upsert; the returned client id is stable and
        derived from the organization id (one FL client per organization)."""
        org = req.organization
        for dev in req.devices:
            if dev.organizationId != org.id:
                raise ValidationFailed(f"device {dev.id!r} belongs to {dev.organizationId!r}, not {org.id!r}")
        device_ids = {d.id for d in req.devices}
        known_devices = device_ids | set(self._catalog.devices)
        for asset in req.assets:
            if asset.edgeDeviceId not in known_devices:
                raise ValidationFailed(f"asset {asset.id!r} references unknown device {asset.edgeDeviceId!r}")
        try:
            validate_hierarchy(list(req.assets), list(req.assetTypes))
        except IflError as exc:
            raise ValidationFailed(str(exc)) from exc
        for at in req.assetTypes:
            missing = [a for a in at.aspectTypeIds if a not in {x.id for x in req.aspectTypes} | set(self._catalog.aspectTypes)]
            if missing:
                raise ValidationFailed(f"asset type {at.id!r} references unknown aspect types {missing}")

        with self._lock:
            cat = self._catalog
            new = cat.model_copy(
                update=dict(
                    organizations={**cat.organizations, org.id: org},
                    devices={**cat.devices, **{d.id: d for d in req.devices}},
                    assets={**cat.assets, **{a.id: a for a in req.assets}},
                    assetTypes={**cat.assetTypes, **self._merged(cat.assetTypes, req.assetTypes, "asset type")},
                    aspectTypes={**cat.aspectTypes, **self._merged(cat.aspectTypes, req.aspectTypes, "aspect type")},
                )
            )
            self._commit(new)
        return org.id

    @staticmethod
    def _merged(existing, records, kind: str) -> dict:
        out = {}
        for rec in records:
            prior = existing.get(rec.id)
            if prior is not None and prior != rec:
                raise ConflictingMetadata(f"{kind} {rec.id!r} re-registered with different content")
            out[rec.id] = rec
        return out

    def upsert_model_spec(self, spec: MLModelSpec) -> None:
        aspect = self._catalog.aspectTypes.get(spec.aspectTypeId)
        if aspect is None:
            raise ValidationFailed(f"model spec {spec.id!r} references unknown aspect type {spec.aspectTypeId!r}")
        if spec.inputDim != aspect.sample_width:
            raise ValidationFailed(
                f"model spec {spec.id!r} has inputDim {spec.inputDim}, aspect width is {aspect.sample_width}"
            )
        with self._lock:
            cat = self._catalog
            prior = cat.modelSpecs.get(spec.id)
            if prior is not None and prior != spec:
                raise ConflictingMetadata(f"model spec {spec.id!r} re-registered with different content")
            self._commit(cat.model_copy(update=dict(modelSpecs={**cat.modelSpecs, spec.id: spec})))

    # -- criteria ----------------------------------------------------------

    def post_search_criteria(self, criteria: CohortSearchCriteria) -> None:
        """Store the client's cohort search criteria, replacing any prior."""
        if criteria.clientId not in self._catalog.organizations:
            raise UnknownClient(criteria.clientId)
        with self._lock:
            cat = self._catalog
            self._commit(cat.model_copy(update=dict(criteria={**cat.criteria, criteria.clientId: criteria})))

    def criteria_of(self, client_id: str) -> Optional[CohortSearchCriteria]:
        return self._catalog.criteria.get(client_id)

    # -- queries -----------------------------------------------------------

    def catalog_query(
        self,
        organizationId: Optional[str] = None,
        assetTypeId: Optional[str] = None,
        industry: Optional[str] = None,
    ) -> Catalog:
        """All records matching every present filter field. Never includes
        raw datasets (the catalog stores none)."""
        cat = self._catalog
        orgs = {
            oid: o
            for oid, o in cat.organizations.items()
            if (organizationId is None or oid == organizationId) and (industry is None or o.industry == industry)
        }
        devices = {d.id: d for d in cat.devices.values() if d.organizationId in orgs}
        assets = {
            a.id: a
            for a in cat.assets.values()
            if a.edgeDeviceId in devices and (assetTypeId is None or a.assetTypeId == assetTypeId)
        }
        if assetTypeId is not None:
            orgs = {oid: o for oid, o in orgs.items() if any(devices[a.edgeDeviceId].organizationId == oid for a in assets.values())}
            devices = {d.id: d for d in devices.values() if d.organizationId in orgs}
        type_ids = {a.assetTypeId for a in assets.values()}
        asset_types = {tid: t for tid, t in cat.assetTypes.items() if tid in type_ids}
        aspect_ids = {aid for t in asset_types.values() for aid in t.aspectTypeIds}
        aspect_types = {aid: a for aid, a in cat.aspectTypes.items() if aid in aspect_ids}
        return Catalog(
            organizations=orgs,
            devices=devices,
            assets=assets,
            assetTypes=asset_types,
            aspectTypes=aspect_types,
        )

    def client_metadata(self, client_id: str) -> ClientMetadata:
        cat = self._catalog
        org = cat.organizations.get(client_id)
        if org is None:
            raise UnknownClient(client_id)
        device_ids = {d.id for d in cat.devices.values() if d.organizationId == client_id}
        assets = [a for a in cat.assets.values() if a.edgeDeviceId in device_ids]
        type_ids = sorted({a.assetTypeId for a in assets})
        aspect_ids = sorted(
            {aid for t in type_ids if t in cat.assetTypes for aid in cat.assetTypes[t].aspectTypeIds}
        )
        return ClientMetadata(
            organizationId=org.id,
            industry=org.industry,
            assetTypeIds=tuple(type_ids),
            aspectTypeIds=tuple(aspect_ids),
        )

    def compatible(self, client_a: str, client_b: str) -> bool:
        """True iff both clients' criteria accept each other. Clients with no
        posted criteria accept everyone; a client is compatible with itself."""
        meta_a = self.client_metadata(client_a)
        meta_b = self.client_metadata(client_b)
        if client_a == client_b:
            return True
        return criteria_accepts(self.criteria_of(client_a), meta_b) and criteria_accepts(
            self.criteria_of(client_b), meta_a
        )

    def registered_clients(self) -> Iterator[str]:
        return iter(sorted(self._catalog.organizations))

    # -- persistence ---------------------------------------------------------

    def _commit(self, catalog: Catalog) -> None:
        self._catalog = catalog
        if self._path is None:
            return
        directory = os.path.dirname(os.path.abspath(self._path))
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".catalog-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(json.dumps(json.loads(catalog.model_dump_json()), indent=2, sort_keys=True))
                fh.write("\n")
            os.replace(tmp, self._path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
