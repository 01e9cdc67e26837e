"""
Moduł dostawcy tłumaczeń Google Translate (REST v2).
"""

import logging
from typing import Optional

import aiohttp

from core.data_models import Language
from core.exceptions import CredentialsError, TranslationError
from core.providers import TranslationProvider

logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://translation.googleapis.com/language/translate/v2"


class GoogleTranslateProvider(TranslationProvider):
    """Tłumaczenie przez Google Cloud Translation API z kluczem API."""

    name = "google"

    def __init__(self, api_key: Optional[str], endpoint: str = DEFAULT_ENDPOINT, timeout: int = 30):
        """
        Args:
            api_key: Klucz API (TAXACC_GOOGLE_API_KEY lub GOOGLE_TRANSLATE_API_KEY)
            endpoint: Adres endpointu REST
            timeout: Limit czasu zapytania w sekundach
        """
        self.api_key = api_key
        self.endpoint = endpoint
        self.timeout = timeout

    def validate(self) -> None:
        if not self.api_key:
            raise CredentialsError(
                "Google Translate needs an API key: set TAXACC_GOOGLE_API_KEY "
                "or GOOGLE_TRANSLATE_API_KEY, or choose another translator in the config"
            )

    async def translate(self, text: str, source: Language, target: Language) -> str:
        self.validate()
        payload = {
            "q": text,
            "source": Language(source).value,
            "target": Language(target).value,
            "format": "text",
        }
        async with aiohttp.ClientSession(timeout=aiohttp.ClientTimeout(total=self.timeout)) as session:
            try:
                async with session.post(self.endpoint, params={"key": self.api_key}, json=payload) as response:
                    if response.status in (401, 403):
                        raise CredentialsError(f"Google Translate rejected the API key ({response.status})")
                    if response.status != 200:
                        raise TranslationError(f"Google Translate returned HTTP {response.status}")
                    result = await response.json()
            except aiohttp.ClientError as e:
                logger.error(f"Error calling Google Translate: {e}")
                raise TranslationError(f"Google Translate request failed: {e}") from e
        try:
            return result["data"]["translations"][0]["translatedText"]
        except (KeyError, IndexError, TypeError) as e:
            raise TranslationError(f"Unexpected Google Translate response: {result!r}") from e
